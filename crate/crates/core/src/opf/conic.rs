//! Standard-form conic programs and solver backends.
//!
//! `minimize cᵀx  subject to  s = b − A x,  s ∈ K`, with `K` a product of
//! zero, nonnegative, second-order and PSD (svec, upper triangle by columns,
//! off-diagonals scaled by √2) cones in that row order.

use std::fmt::Write as _;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};

use super::OpfError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    Zero(usize),
    Nonneg(usize),
    /// Second-order cone of the given dimension, `s₀ ≥ ‖s₁..‖`.
    Soc(usize),
    /// PSD cone of real symmetric matrices of the given side.
    Psd(usize),
}

impl Cone {
    pub fn rows(self) -> usize {
        match self {
            Cone::Zero(n) | Cone::Nonneg(n) | Cone::Soc(n) => n,
            Cone::Psd(side) => side * (side + 1) / 2,
        }
    }

    fn keyword(self) -> (&'static str, usize) {
        match self {
            Cone::Zero(n) => ("zero", n),
            Cone::Nonneg(n) => ("nonneg", n),
            Cone::Soc(n) => ("soc", n),
            Cone::Psd(n) => ("psd", n),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicProblem {
    pub n_vars: usize,
    pub c: Vec<f64>,
    /// `(row, col, value)` entries of `A`.
    pub a: Vec<(usize, usize, f64)>,
    pub b: Vec<f64>,
    pub cones: Vec<Cone>,
}

pub const EXPORT_HEADER: &str = "# dropf-conic v1";

impl ConicProblem {
    pub fn n_rows(&self) -> usize {
        self.b.len()
    }

    pub fn check(&self) -> Result<(), OpfError> {
        let rows: usize = self.cones.iter().map(|c| c.rows()).sum();
        if rows != self.b.len() || self.c.len() != self.n_vars {
            return Err(OpfError::Assembly { constraint: "cones".into(), reason: format!("{rows} cone rows for {} rows of b", self.b.len()) });
        }
        if let Some(e) = self.a.iter().find(|(r, c, v)| *r >= rows || *c >= self.n_vars || !v.is_finite()) {
            return Err(OpfError::Assembly { constraint: "A".into(), reason: format!("invalid entry {e:?}") });
        }
        Ok(())
    }

    /// Self-describing sparse text form.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{EXPORT_HEADER}");
        let _ = writeln!(s, "# minimize c'x subject to b - A x in K; psd blocks are svec (upper triangle by columns, off-diagonals times sqrt 2)");
        let _ = writeln!(s, "vars {}", self.n_vars);
        let _ = writeln!(s, "rows {}", self.b.len());
        for c in &self.cones {
            let (k, n) = c.keyword();
            let _ = writeln!(s, "cone {k} {n}");
        }
        let nz_c: Vec<_> = self.c.iter().enumerate().filter(|(_, v)| **v != 0.0).collect();
        let _ = writeln!(s, "c {}", nz_c.len());
        for (i, v) in nz_c {
            let _ = writeln!(s, "{i} {v:?}");
        }
        let _ = writeln!(s, "A {}", self.a.len());
        for (r, c, v) in &self.a {
            let _ = writeln!(s, "{r} {c} {v:?}");
        }
        let nz_b: Vec<_> = self.b.iter().enumerate().filter(|(_, v)| **v != 0.0).collect();
        let _ = writeln!(s, "b {}", nz_b.len());
        for (i, v) in nz_b {
            let _ = writeln!(s, "{i} {v:?}");
        }
        s.push_str("end\n");
        s
    }

    pub fn from_text(text: &str) -> Result<ConicProblem, OpfError> {
        let bad = |line: usize, msg: &str| OpfError::Parse(format!("line {}: {msg}", line + 1));
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, l)) if l.trim() == EXPORT_HEADER => {}
            _ => return Err(OpfError::Parse(format!("missing header '{EXPORT_HEADER}'"))),
        }
        let mut lines = lines.filter(|(_, l)| !l.starts_with('#')).peekable();
        let mut next_kv = |key: &str| -> Result<(usize, Vec<String>), OpfError> {
            let (n, l) = lines.next().ok_or_else(|| OpfError::Parse(format!("unexpected end, expected '{key}'")))?;
            let mut it = l.split_whitespace();
            if it.next() != Some(key) {
                return Err(bad(n, &format!("expected '{key}'")));
            }
            Ok((n, it.map(str::to_string).collect()))
        };
        let num = |n: usize, s: &str| s.parse::<usize>().map_err(|_| bad(n, &format!("bad integer '{s}'")));
        let flt = |n: usize, s: &str| s.parse::<f64>().map_err(|_| bad(n, &format!("bad number '{s}'")));

        let (n, v) = next_kv("vars")?;
        let n_vars = num(n, v.first().map(String::as_str).unwrap_or(""))?;
        let (n, v) = next_kv("rows")?;
        let n_rows = num(n, v.first().map(String::as_str).unwrap_or(""))?;
        let mut cones = Vec::new();
        let mut c = vec![0.0; n_vars];
        let mut a = Vec::new();
        let mut b = vec![0.0; n_rows];
        let mut section: Option<(&str, usize)> = None;
        let mut ended = false;
        for (n, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            match section {
                Some((name, left)) if left > 0 => {
                    match (name, f.as_slice()) {
                        ("c", [i, v]) => *c.get_mut(num(n, i)?).ok_or_else(|| bad(n, "index out of range"))? = flt(n, v)?,
                        ("b", [i, v]) => *b.get_mut(num(n, i)?).ok_or_else(|| bad(n, "index out of range"))? = flt(n, v)?,
                        ("A", [r, col, v]) => a.push((num(n, r)?, num(n, col)?, flt(n, v)?)),
                        _ => return Err(bad(n, "malformed entry")),
                    }
                    section = Some((name, left - 1));
                    continue;
                }
                _ => {}
            }
            match f.as_slice() {
                ["cone", kind, k] => {
                    let k = num(n, k)?;
                    cones.push(match *kind {
                        "zero" => Cone::Zero(k),
                        "nonneg" => Cone::Nonneg(k),
                        "soc" => Cone::Soc(k),
                        "psd" => Cone::Psd(k),
                        other => return Err(bad(n, &format!("unknown cone '{other}'"))),
                    });
                }
                [name @ ("c" | "A" | "b"), k] => section = Some((name, num(n, k)?)),
                ["end"] => {
                    ended = true;
                    break;
                }
                _ => return Err(bad(n, "unexpected line")),
            }
        }
        if !ended {
            return Err(OpfError::Parse("missing 'end'".into()));
        }
        let p = ConicProblem { n_vars, c, a, b, cones };
        p.check()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: u32,
    /// Seconds; infinite for no limit.
    pub max_time: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-8, max_iter: 200, max_time: f64::INFINITY }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RawStatus {
    Optimal,
    /// Converged to reduced accuracy.
    Inaccurate,
    PrimalInfeasible,
    DualInfeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawSolution {
    pub status: RawStatus,
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    /// Dual variables of the cone constraints.
    pub z: Vec<f64>,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: u32,
    pub solve_time: f64,
}

/// A conic solver backend. Implementations must be safe to call from
/// several threads on distinct problems.
pub trait ConicSolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, problem: &ConicProblem, opts: &SolverOptions) -> Result<RawSolution, OpfError>;
}

/// Interior-point backend built on Clarabel.
#[derive(Debug, Clone, Copy, Default)]
pub struct ClarabelSolver;

impl ConicSolver for ClarabelSolver {
    fn name(&self) -> &'static str {
        "clarabel"
    }

    fn solve(&self, p: &ConicProblem, opts: &SolverOptions) -> Result<RawSolution, OpfError> {
        p.check()?;
        let m = p.n_rows();
        let n = p.n_vars;
        let (mut ri, mut ci, mut vi) = (Vec::with_capacity(p.a.len()), Vec::with_capacity(p.a.len()), Vec::with_capacity(p.a.len()));
        for &(r, c, v) in &p.a {
            ri.push(r);
            ci.push(c);
            vi.push(v);
        }
        let a = CscMatrix::new_from_triplets(m, n, ri, ci, vi);
        let pm = CscMatrix::<f64>::zeros((n, n));
        let cones: Vec<SupportedConeT<f64>> = p
            .cones
            .iter()
            .map(|c| match *c {
                Cone::Zero(k) => SupportedConeT::ZeroConeT(k),
                Cone::Nonneg(k) => SupportedConeT::NonnegativeConeT(k),
                Cone::Soc(k) => SupportedConeT::SecondOrderConeT(k),
                Cone::Psd(k) => SupportedConeT::PSDTriangleConeT(k),
            })
            .collect();
        let settings = DefaultSettingsBuilder::default()
            .verbose(std::env::var_os("DROPF_SOLVER_VERBOSE").is_some())
            .max_iter(opts.max_iter)
            .time_limit(opts.max_time)
            .tol_gap_abs(opts.tol)
            .tol_gap_rel(opts.tol)
            .tol_feas(opts.tol)
            .tol_ktratio(opts.tol.min(1e-6))
            // the default 1e-8 stalls on stiff trunk segments carrying tiny currents
            .static_regularization_constant(1e-7)
            .build()
            .map_err(|e| OpfError::Solver(format!("settings: {e:?}")))?;
        let mut solver = DefaultSolver::new(&pm, &p.c, &a, &p.b, &cones, settings)
            .map_err(|e| OpfError::Solver(format!("setup: {e:?}")))?;
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved => RawStatus::Optimal,
            SolverStatus::AlmostSolved => RawStatus::Inaccurate,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => RawStatus::PrimalInfeasible,
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => RawStatus::DualInfeasible,
            other => return Err(OpfError::Solver(format!("clarabel stopped with {other:?} after {} iterations", sol.iterations))),
        };
        Ok(RawSolution {
            status,
            x: sol.x.clone(),
            s: sol.s.clone(),
            z: sol.z.clone(),
            objective: sol.obj_val,
            primal_residual: sol.r_prim,
            dual_residual: sol.r_dual,
            iterations: sol.iterations,
            solve_time: sol.solve_time,
        })
    }
}

/// Backend named by `DROPF_SOLVER` (default `clarabel`).
pub fn solver_from_env() -> Result<Box<dyn ConicSolver>, OpfError> {
    let name = std::env::var("DROPF_SOLVER").unwrap_or_else(|_| "clarabel".into());
    solver_by_name(&name)
}

pub fn solver_by_name(name: &str) -> Result<Box<dyn ConicSolver>, OpfError> {
    match name.trim().to_ascii_lowercase().as_str() {
        "" | "clarabel" => Ok(Box::new(ClarabelSolver)),
        other => Err(OpfError::Solver(format!("unknown solver backend '{other}' (available: clarabel)"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psd_svec_layout() {
        // min t  s.t. [[1, 0, 1], [0, 1, 0], [1, 0, t]] ⪰ 0  →  t = 1
        let r2 = std::f64::consts::SQRT_2;
        // svec order: 11, 12, 22, 13, 23, 33
        let b = vec![1.0, 0.0, 1.0, r2, 0.0, 0.0];
        let p = ConicProblem { n_vars: 1, c: vec![1.0], a: vec![(5, 0, -1.0)], b, cones: vec![Cone::Psd(3)] };
        let sol = ClarabelSolver.solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, RawStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-6, "{}", sol.x[0]);
    }

    #[test]
    fn detects_infeasibility() {
        // x ≥ 1 and x ≤ 0
        let p = ConicProblem { n_vars: 1, c: vec![1.0], a: vec![(0, 0, -1.0), (1, 0, 1.0)], b: vec![-1.0, 0.0], cones: vec![Cone::Nonneg(2)] };
        assert_eq!(ClarabelSolver.solve(&p, &SolverOptions::default()).unwrap().status, RawStatus::PrimalInfeasible);
    }

    #[test]
    fn text_round_trip() {
        let p = ConicProblem {
            n_vars: 3,
            c: vec![1.0, 0.0, -0.1],
            a: vec![(0, 0, 1.0), (1, 2, -1.0 / 3.0), (2, 1, 2.5e-17)],
            b: vec![0.5, 0.0, 1.0],
            cones: vec![Cone::Zero(1), Cone::Soc(2)],
        };
        let t = p.to_text();
        let q = ConicProblem::from_text(&t).unwrap();
        assert_eq!(p, q);
        assert_eq!(q.to_text(), t);
        assert!(ConicProblem::from_text("vars 1").is_err());
    }

    #[test]
    fn unknown_backend_is_rejected() {
        assert!(solver_by_name("sedumi").is_err());
        assert_eq!(solver_by_name("Clarabel").unwrap().name(), "clarabel");
    }
}
