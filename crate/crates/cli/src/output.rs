//! CSV and summary writers. Floats use `{:.16e}` so values round-trip.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use cellflux::cell_model::CellSolution;
use cellflux::monotone::IterationReport;

use crate::config::RunConfig;
use crate::{CliError, PointResult};

pub(crate) struct OutputDir {
    dir: PathBuf,
    prefix: String,
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

impl OutputDir {
    pub(crate) fn create(cfg: &RunConfig) -> Result<Self, CliError> {
        fs::create_dir_all(&cfg.output.directory)?;
        Ok(Self {
            dir: cfg.output.directory.clone(),
            prefix: cfg.output.prefix.clone(),
        })
    }

    pub(crate) fn dir(&self) -> &Path {
        &self.dir
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        fs::write(self.dir.join(format!("{}{name}", self.prefix)), contents)?;
        Ok(())
    }

    fn history(report: &IterationReport) -> String {
        let mut s = String::from("n,gap_ascending,gap_descending,gap_between\n");
        for (n, g) in report.chain_gaps.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                n + 1,
                num(g.ascending),
                num(g.descending),
                num(g.between)
            );
        }
        s
    }

    fn report_lines(s: &mut String, report: &IterationReport) {
        let _ = writeln!(s, "iterations = {}", report.iterations);
        let _ = writeln!(s, "converged = {}", report.converged);
        let _ = writeln!(s, "m_initial = {}", num(report.m_initial));
        let _ = writeln!(s, "m_used = {}", num(report.m_used));
        let _ = writeln!(s, "tolerance_scale = {}", num(report.scale));
        let _ = writeln!(s, "final_gap = {}", num(report.final_gap()));
        let _ = writeln!(s, "residual_minimal = {}", num(report.residual_minimal));
        let _ = writeln!(s, "residual_maximal = {}", num(report.residual_maximal));
        let _ = writeln!(s, "residual_tolerance = {}", num(report.residual_tolerance));
    }

    fn header(s: &mut String, cfg: &RunConfig) {
        let _ = writeln!(s, "period = {}", num(cfg.model.period));
        let _ = writeln!(s, "grid = {}", cfg.solver.grid);
        let _ = writeln!(s, "tol_step = {}", num(cfg.solver.tol_step));
        let _ = writeln!(s, "tol_unique = {}", num(cfg.solver.tol_unique));
        let _ = writeln!(s, "m_scale = {}", num(cfg.solver.m_scale));
        let _ = writeln!(s, "seed = {}", cfg.trajectory.seed);
    }

    pub(crate) fn write_solution(
        &self,
        cfg: &RunConfig,
        solution: &CellSolution,
    ) -> Result<(), CliError> {
        let (x, y) = solution.periodic_solution();
        let mut csv = String::from("t,x,y\n");
        for k in 0..=x.intervals() {
            let _ = writeln!(
                csv,
                "{},{},{}",
                num(x.time(k)),
                num(x.values()[k]),
                num(y.values()[k])
            );
        }
        self.write("periodic_solution.csv", &csv)?;

        let env = &solution.envelope.envelope;
        let (sub, sup) = (env.sub(), env.sup());
        let mut csv = String::from("t,sub_x,sub_y,super_x,super_y\n");
        for k in 0..=sub.x.intervals() {
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                num(sub.x.time(k)),
                num(sub.x.values()[k]),
                num(sub.y.values()[k]),
                num(sup.x.values()[k]),
                num(sup.y.values()[k])
            );
        }
        self.write("envelope.csv", &csv)?;
        self.write("iteration_history.csv", &Self::history(&solution.report))?;

        let c = &solution.condition;
        let e = &solution.envelope;
        let mut s = String::new();
        Self::header(&mut s, cfg);
        let _ = writeln!(s, "alpha_mean = {}", num(c.alpha_mean));
        let _ = writeln!(s, "gamma_mean = {}", num(c.gamma_mean));
        let _ = writeln!(s, "condition_value = {}", num(c.value));
        let _ = writeln!(s, "theta = {}", num(e.supersolution_config.theta));
        let _ = writeln!(s, "m_env = {}", num(e.supersolution_config.m_env));
        let _ = writeln!(s, "sub_c_x = {}", num(e.subsolution.c_x));
        let _ = writeln!(s, "sub_c_y = {}", num(e.subsolution.c_y));
        Self::report_lines(&mut s, &solution.report);
        let _ = writeln!(
            s,
            "identity_residual_minimal = {}",
            num(solution.identity_residual_minimal)
        );
        let _ = writeln!(
            s,
            "identity_residual_maximal = {}",
            num(solution.identity_residual_maximal)
        );
        let _ = writeln!(s, "unique = {}", solution.unique);
        self.write("summary.txt", &s)
    }

    /// Iteration history and summary of a run that did not converge.
    pub(crate) fn write_partial(
        &self,
        cfg: &RunConfig,
        report: &IterationReport,
    ) -> Result<(), CliError> {
        self.write("iteration_history.csv", &Self::history(report))?;
        let mut s = String::new();
        Self::header(&mut s, cfg);
        Self::report_lines(&mut s, report);
        self.write("summary.txt", &s)
    }

    pub(crate) fn write_simulation(
        &self,
        cfg: &RunConfig,
        results: &[PointResult],
    ) -> Result<(), CliError> {
        let stride = cfg.output.trajectory_stride;
        let mut summary = String::new();
        Self::header(&mut summary, cfg);
        let _ = writeln!(summary, "step = {}", num(cfg.step()));
        let _ = writeln!(summary, "horizon = {}", cfg.trajectory.horizon);
        let _ = writeln!(summary, "attraction_tol = {}", num(cfg.trajectory.attraction_tol));
        for (i, r) in results.iter().enumerate() {
            let traj = &r.trajectory;
            let mut csv = String::from("t,x,y\n");
            let last = traj.times.len() - 1;
            for k in (0..=last).filter(|k| k % stride == 0 || *k == last) {
                let _ = writeln!(
                    csv,
                    "{},{},{}",
                    num(traj.times[k]),
                    num(traj.states[k][0]),
                    num(traj.states[k][1])
                );
            }
            self.write(&format!("trajectory_{i}.csv"), &csv)?;

            let a = &r.attraction;
            let mut csv = String::from("k,d_k,ratio\n");
            for (k, d) in a.distances.iter().enumerate() {
                let ratio = if k == 0 { String::new() } else { num(a.ratios[k - 1]) };
                let _ = writeln!(csv, "{},{},{}", k + 1, num(*d), ratio);
            }
            self.write(&format!("attraction_{i}.csv"), &csv)?;

            let _ = writeln!(summary, "point_{i} = {} {}", num(r.point.0), num(r.point.1));
            let _ = writeln!(summary, "d_final_{i} = {}", num(a.final_distance()));
            let _ = writeln!(summary, "attracted_{i} = {}", a.passed);
        }
        self.write("simulation_summary.txt", &summary)
    }
}
