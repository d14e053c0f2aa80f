//! Branch-flow-model SDP relaxation in conic standard form.

use std::f64::consts::SQRT_2;

use super::conic::{Cone, ConicProblem};
use super::expr::{CExpr, CExprMatrix, LinExpr};
use super::{OpfError, OpfOptions};
use crate::netmodel::{NetworkModel, Topology, C64};
use crate::uncertainty::VoltageLimits;

/// Per-bus load of one dispatch window: `s = s_pq + |V|² conj(y)` (pu).
#[derive(Debug, Clone, PartialEq)]
pub struct BusLoads {
    pub s_pq: Vec<C64>,
    pub y: Vec<C64>,
}

impl BusLoads {
    /// The loads and shunts stored in the network itself.
    pub fn from_network(net: &NetworkModel) -> BusLoads {
        BusLoads { s_pq: net.load_injection().iter().map(|s| -s).collect(), y: net.constant_admittance() }
    }
}

/// Variable indices of a Hermitian matrix: real diagonal, and real and
/// imaginary parts of the strict upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct HermVars {
    pub n: usize,
    diag: Vec<usize>,
    upper: Vec<(usize, usize)>,
}

impl HermVars {
    fn alloc(n: usize, next: &mut usize) -> HermVars {
        let diag = (0..n).map(|_| take(next)).collect();
        let upper = (0..n * (n - 1) / 2).map(|_| (take(next), take(next))).collect();
        HermVars { n, diag, upper }
    }

    fn upper_index(&self, r: usize, c: usize) -> usize {
        // row-major strict upper triangle
        r * self.n - r * (r + 1) / 2 + (c - r - 1)
    }

    pub fn expr(&self, r: usize, c: usize) -> CExpr {
        use std::cmp::Ordering::*;
        match r.cmp(&c) {
            Equal => CExpr::real(LinExpr::var(self.diag[r])),
            Less => {
                let (re, im) = self.upper[self.upper_index(r, c)];
                CExpr::new(LinExpr::var(re), LinExpr::var(im))
            }
            Greater => self.expr(c, r).conj(),
        }
    }

    pub fn diag_var(&self, r: usize) -> usize {
        self.diag[r]
    }

    pub fn value(&self, x: &[f64]) -> nalgebra::DMatrix<C64> {
        nalgebra::DMatrix::from_fn(self.n, self.n, |r, c| self.expr(r, c).eval(x))
    }
}

fn take(next: &mut usize) -> usize {
    *next += 1;
    *next - 1
}

/// How a node's voltage matrix is represented.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeVoltage {
    /// `V = w₀ Γ`, with `Γ_pq = e^{j(θp − θq)}` for the balanced phase angles.
    Balanced { w0: usize, angles: Vec<f64> },
    Free(HermVars),
}

impl NodeVoltage {
    pub fn n(&self) -> usize {
        match self {
            NodeVoltage::Balanced { angles, .. } => angles.len(),
            NodeVoltage::Free(h) => h.n,
        }
    }

    pub fn expr(&self, r: usize, c: usize) -> CExpr {
        match self {
            NodeVoltage::Balanced { w0, angles } => {
                let g = C64::from_polar(1.0, angles[r] - angles[c]);
                CExpr::new(LinExpr::var(*w0).scaled(g.re), LinExpr::var(*w0).scaled(g.im))
            }
            NodeVoltage::Free(h) => h.expr(r, c),
        }
    }

    pub fn value(&self, x: &[f64]) -> nalgebra::DMatrix<C64> {
        let n = self.n();
        nalgebra::DMatrix::from_fn(n, n, |r, c| self.expr(r, c).eval(x))
    }
}

/// How a branch's power matrix `S` is represented.
#[derive(Debug, Clone, PartialEq)]
pub enum BranchPower {
    /// `(re, im)` variable per entry, row-major.
    Full(Vec<(usize, usize)>),
    /// `S = γ xᴴ` on a branch leaving a balanced substation: `V_i = w₀ γγᴴ`
    /// puts the range of `S` on `γ`, and the PSD block reduces to
    /// `[[w₀, xᴴ], [x, L]] ⪰ 0`, which keeps a strictly feasible interior.
    RankOne { gamma: Vec<C64>, x: Vec<(usize, usize)> },
}

/// Where each physical quantity lives in the decision vector.
#[derive(Debug, Clone)]
pub struct OpfLayout {
    pub n_vars: usize,
    pub topology: Topology,
    pub node_v: Vec<NodeVoltage>,
    pub branch_s: Vec<BranchPower>,
    pub branch_l: Vec<HermVars>,
    /// Per DER, per phase `(p, q)` variables.
    pub der: Vec<Vec<(usize, usize)>>,
    /// Substation injection per substation phase `(p, q)`.
    pub s0: Vec<(usize, usize)>,
    /// Position of each branch's PSD block among the PSD cones.
    pub psd_side: Vec<usize>,
    /// Row ranges of the constraint groups, for reporting.
    pub n_balance_rows: usize,
    pub n_ohm_rows: usize,
}

impl OpfLayout {
    pub fn s_matrix(&self, k: usize) -> CExprMatrix {
        let n = self.branch_l[k].n;
        let var = |(re, im): (usize, usize)| CExpr::new(LinExpr::var(re), LinExpr::var(im));
        match &self.branch_s[k] {
            BranchPower::Full(vars) => CExprMatrix::from_fn(n, n, |r, c| var(vars[r * n + c])),
            BranchPower::RankOne { gamma, x } => CExprMatrix::from_fn(n, n, |r, c| gamma[r] * &var(x[c]).conj()),
        }
    }

    pub fn s_value(&self, k: usize, x: &[f64]) -> nalgebra::DMatrix<C64> {
        let s = self.s_matrix(k);
        nalgebra::DMatrix::from_fn(s.n, s.m, |r, c| s.get(r, c).eval(x))
    }
}

#[derive(Debug, Clone)]
pub struct AssembledOpf {
    pub problem: ConicProblem,
    pub layout: OpfLayout,
}

#[derive(Default)]
struct Rows {
    zero: Vec<LinExpr>,
    nonneg: Vec<LinExpr>,
    soc: Vec<Vec<LinExpr>>,
    psd: Vec<(usize, Vec<LinExpr>)>,
}

/// Assembles the relaxed OPF: power balance with phase projection, the
/// matrix voltage drop, one PSD block per branch, a balanced (or free)
/// substation voltage, squared voltage bounds from `limits`, ampacity, and
/// DER box and rating constraints. The objective is the total real power
/// supplied by the substation.
///
/// `p_max` optionally overrides each DER's real-power cap (pu per phase).
pub fn assemble_opf(
    net: &NetworkModel,
    loads: &BusLoads,
    p_max: Option<&[f64]>,
    limits: &VoltageLimits,
    opts: &OpfOptions,
) -> Result<AssembledOpf, OpfError> {
    let nb = net.buses().len();
    let dim_err = |constraint: &str, reason: String| OpfError::Assembly { constraint: constraint.to_string(), reason };
    if loads.s_pq.len() != nb || loads.y.len() != nb {
        return Err(dim_err("loads", format!("expected {nb} bus entries")));
    }
    if limits.lo_sq.len() != nb || limits.hi_sq.len() != nb {
        return Err(dim_err("voltage-limits", format!("expected {nb} bus entries")));
    }
    if let Some(p) = p_max {
        if p.len() != net.ders().len() {
            return Err(dim_err("der-caps", format!("expected {} DER caps", net.ders().len())));
        }
    }
    let topo = Topology::new(net)?;
    let root = topo.root;
    let (reg_lo, reg_hi) = opts.regulator;

    let mut next = 0usize;
    let mut node_v = Vec::with_capacity(net.nodes().len());
    for (i, node) in net.nodes().iter().enumerate() {
        let n = node.phases.len();
        node_v.push(if i == root && opts.slack_balanced {
            NodeVoltage::Balanced { w0: take(&mut next), angles: node.phases.iter().map(|p| p.balanced_angle()).collect() }
        } else {
            NodeVoltage::Free(HermVars::alloc(n, &mut next))
        });
    }
    let mut branch_s = Vec::new();
    let mut branch_l = Vec::new();
    for (k, br) in net.branches().iter().enumerate() {
        let n = br.phases.len();
        if br.z.nrows() != n || br.z.ncols() != n {
            return Err(dim_err(&format!("ohm:{}->{}", br.from, br.to), format!("impedance is not {n}x{n}")));
        }
        if topo.from_node[k] == root && opts.slack_balanced {
            let gamma = br.phases.iter().map(|p| C64::from_polar(1.0, p.balanced_angle())).collect();
            let x = (0..n).map(|_| (take(&mut next), take(&mut next))).collect();
            branch_s.push(BranchPower::RankOne { gamma, x });
        } else {
            branch_s.push(BranchPower::Full((0..n * n).map(|_| (take(&mut next), take(&mut next))).collect()));
        }
        branch_l.push(HermVars::alloc(n, &mut next));
    }
    let mut der = Vec::new();
    for d in net.ders() {
        let node = net.node(&d.node).ok_or_else(|| dim_err(&format!("der:{}", d.id), format!("unknown node '{}'", d.node)))?;
        if !d.phases.is_subset_of(node.phases) {
            return Err(dim_err(&format!("der:{}", d.id), format!("phases {} not on node '{}'", d.phases, d.node)));
        }
        der.push(d.phases.iter().map(|_| (take(&mut next), take(&mut next))).collect::<Vec<_>>());
    }
    let s0: Vec<(usize, usize)> = net.nodes()[root].phases.iter().map(|_| (take(&mut next), take(&mut next))).collect();

    let mut layout = OpfLayout {
        n_vars: next,
        topology: topo,
        node_v,
        branch_s,
        branch_l,
        der,
        s0,
        psd_side: Vec::new(),
        n_balance_rows: 0,
        n_ohm_rows: 0,
    };
    let topo = &layout.topology;
    let mut rows = Rows::default();

    // power balance per node-phase
    for (i, node) in net.nodes().iter().enumerate() {
        for (pi, phase) in node.phases.iter().enumerate() {
            let bus = net.bus_index(i, phase).unwrap();
            let mut e = CExpr::default();
            for &k in &topo.children[i] {
                if let Some(p) = net.branches()[k].phases.position(phase) {
                    e += layout.s_matrix(k).get(p, p);
                }
            }
            if let Some(k) = topo.parent_branch[i] {
                let br = &net.branches()[k];
                if let Some(p) = br.phases.position(phase) {
                    let zl = layout_l(&layout, k).left_mul(&br.z);
                    e = e - layout.s_matrix(k).get(p, p) + zl.get(p, p);
                }
            }
            // generation
            if i == root {
                let (pv, qv) = layout.s0[pi];
                e = e - &CExpr::new(LinExpr::var(pv), LinExpr::var(qv));
            }
            for (d, vars) in net.ders().iter().zip(&layout.der) {
                if d.node == node.id {
                    if let Some(p) = d.phases.position(phase) {
                        let (pv, qv) = vars[p];
                        e = e - &CExpr::new(LinExpr::var(pv), LinExpr::var(qv));
                    }
                }
            }
            // load: s_pq + w conj(y)
            e += &CExpr::constant(loads.s_pq[bus]);
            let w = layout.node_v[i].expr(pi, pi).re;
            let y = loads.y[bus];
            e += &CExpr::new(w.scaled(y.re), w.scaled(-y.im));
            rows.zero.push(e.re);
            rows.zero.push(e.im);
        }
    }
    layout.n_balance_rows = rows.zero.len();

    // voltage drop per branch: V_j = V_i^Φ − (Z Sᴴ + S Zᴴ) + Z L Zᴴ
    for (k, br) in net.branches().iter().enumerate() {
        let (i, j) = (topo.from_node[k], topo.to_node[k]);
        let n = br.phases.len();
        let vi = projected_v(net, &layout, i, k);
        let s = layout.s_matrix(k);
        let zsh = s.adjoint().left_mul(&br.z);
        let szh = s.right_mul(&br.z.adjoint());
        let zlz = layout_l(&layout, k).left_mul(&br.z).right_mul(&br.z.adjoint());
        let pos_j: Vec<usize> = br.phases.iter().map(|p| net.nodes()[j].phases.position(p).unwrap()).collect();
        for r in 0..n {
            for c in r..n {
                let rhs = vi.get(r, c).clone() - zsh.get(r, c) - szh.get(r, c) + zlz.get(r, c);
                let e = layout.node_v[j].expr(pos_j[r], pos_j[c]) - &rhs;
                rows.zero.push(e.re);
                if r != c {
                    rows.zero.push(e.im);
                }
            }
        }
    }
    layout.n_ohm_rows = rows.zero.len() - layout.n_balance_rows;

    // voltage limits on diag(V)
    for (i, node) in net.nodes().iter().enumerate() {
        let mut bounds: Vec<(usize, f64, f64)> = node
            .phases
            .iter()
            .enumerate()
            .map(|(pi, phase)| {
                let bus = net.bus_index(i, phase).unwrap();
                (pi, limits.lo_sq[bus], limits.hi_sq[bus])
            })
            .collect();
        if i == root {
            for b in &mut bounds {
                b.1 = b.1.max(reg_lo * reg_lo);
                b.2 = b.2.min(reg_hi * reg_hi);
            }
            if opts.slack_balanced {
                // every diagonal entry is w₀
                let lo = bounds.iter().map(|b| b.1).fold(f64::NEG_INFINITY, f64::max);
                let hi = bounds.iter().map(|b| b.2).fold(f64::INFINITY, f64::min);
                bounds = vec![(0, lo, hi)];
            }
        }
        for (pi, lo, hi) in bounds {
            let w = layout.node_v[i].expr(pi, pi).re;
            // a zero-width band is an equality, leaving the orthant an interior
            if lo == hi {
                rows.zero.push(w - &LinExpr::constant(lo));
                continue;
            }
            if lo > 0.0 {
                rows.nonneg.push(w.clone() - &LinExpr::constant(lo));
            }
            if hi.is_finite() {
                rows.nonneg.push(LinExpr::constant(hi) - &w);
            }
        }
    }
    // ampacity
    for (k, br) in net.branches().iter().enumerate() {
        for (p, amp) in br.ampacity.iter().enumerate() {
            if amp.is_finite() {
                let l = LinExpr::var(layout.branch_l[k].diag_var(p));
                rows.nonneg.push(LinExpr::constant(amp * amp) - &l);
            }
        }
    }
    // DER box and rating
    for (di, (d, vars)) in net.ders().iter().zip(&layout.der).enumerate() {
        let pmax = p_max.map(|p| p[di]).unwrap_or(d.p_max);
        for &(pv, qv) in vars {
            let (p, q) = (LinExpr::var(pv), LinExpr::var(qv));
            if pmax == d.p_min {
                rows.zero.push(p.clone() - &LinExpr::constant(pmax));
            } else {
                rows.nonneg.push(p.clone() - &LinExpr::constant(d.p_min));
                rows.nonneg.push(LinExpr::constant(pmax) - &p);
            }
            rows.nonneg.push(q.clone() - &LinExpr::constant(d.q_min));
            rows.nonneg.push(LinExpr::constant(d.q_max) - &q);
            rows.soc.push(vec![LinExpr::constant(d.s_rated), p, q]);
        }
    }

    // PSD block per branch
    for (k, br) in net.branches().iter().enumerate() {
        let n = br.phases.len();
        let l = layout_l(&layout, k);
        let m = match &layout.branch_s[k] {
            BranchPower::Full(_) => {
                let vi = projected_v(net, &layout, topo.from_node[k], k);
                let s = layout.s_matrix(k);
                let sh = s.adjoint();
                CExprMatrix::from_fn(2 * n, 2 * n, |r, c| match (r < n, c < n) {
                    (true, true) => vi.get(r, c).clone(),
                    (true, false) => s.get(r, c - n).clone(),
                    (false, true) => sh.get(r - n, c).clone(),
                    (false, false) => l.get(r - n, c - n).clone(),
                })
            }
            BranchPower::RankOne { x, .. } => {
                let NodeVoltage::Balanced { w0, .. } = layout.node_v[root] else { unreachable!() };
                let xe = |i: usize| CExpr::new(LinExpr::var(x[i].0), LinExpr::var(x[i].1));
                CExprMatrix::from_fn(n + 1, n + 1, |r, c| match (r, c) {
                    (0, 0) => CExpr::real(LinExpr::var(w0)),
                    (0, c) => xe(c - 1).conj(),
                    (r, 0) => xe(r - 1),
                    (r, c) => l.get(r - 1, c - 1).clone(),
                })
            }
        };
        let (side, svec) = real_svec(&m, &mut next);
        rows.psd.push((side, svec));
        layout.psd_side.push(side);
    }
    layout.n_vars = next;
    let n_vars = next;

    // emit s = b − A x with s = expr: A = −coef, b = constant
    let mut c = vec![0.0; n_vars];
    for &(pv, _) in &layout.s0 {
        c[pv] = 1.0;
    }
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut cones = Vec::new();
    let emit = |e: &LinExpr, a: &mut Vec<(usize, usize, f64)>, b: &mut Vec<f64>| {
        let row = b.len();
        for (v, coef) in e.compressed().terms {
            a.push((row, v, -coef));
        }
        b.push(e.constant);
    };
    for e in &rows.zero {
        emit(e, &mut a, &mut b);
    }
    cones.push(Cone::Zero(rows.zero.len()));
    if !rows.nonneg.is_empty() {
        for e in &rows.nonneg {
            emit(e, &mut a, &mut b);
        }
        cones.push(Cone::Nonneg(rows.nonneg.len()));
    }
    for block in &rows.soc {
        for e in block {
            emit(e, &mut a, &mut b);
        }
        cones.push(Cone::Soc(block.len()));
    }
    for (side, block) in &rows.psd {
        for e in block {
            emit(e, &mut a, &mut b);
        }
        cones.push(Cone::Psd(*side));
    }
    let problem = ConicProblem { n_vars, c, a, b, cones };
    problem.check()?;
    Ok(AssembledOpf { problem, layout })
}

/// Real PSD cone rows certifying `H = A + jB ⪰ 0` for a Hermitian
/// expression matrix.
///
/// Uses `X = [[A − Y, P − B/2], [P + B/2, Y]] ⪰ 0` with fresh symmetric `P`
/// and `Y`: `H ⪰ 0` exactly when such an `X` exists. Unlike the plain
/// embedding `[[A, −B], [B, A]]`, no two cone rows are copies of each other,
/// which keeps the interior-point KKT systems well conditioned.
fn real_svec(m: &CExprMatrix, next: &mut usize) -> (usize, Vec<LinExpr>) {
    let h = m.n;
    let sym = |next: &mut usize| {
        let mut idx = vec![vec![0usize; h]; h];
        for r in 0..h {
            for c in r..h {
                idx[r][c] = take(next);
                idx[c][r] = idx[r][c];
            }
        }
        idx
    };
    let p = sym(next);
    let y = sym(next);
    let side = 2 * h;
    let mut svec = Vec::with_capacity(side * (side + 1) / 2);
    for col in 0..side {
        for row in 0..=col {
            let (r, c) = (row % h, col % h);
            let e = m.get(r, c);
            let v = match (row < h, col < h) {
                (true, true) => e.re.clone() - &LinExpr::var(y[r][c]),
                (false, false) => LinExpr::var(y[r][c]),
                // X₁₂ = P − B/2 (row in the top half, column in the bottom)
                (true, false) => LinExpr::var(p[r][c]) - &e.im.scaled(0.5),
                (false, true) => unreachable!("upper triangle only"),
            };
            svec.push(if row == col { v } else { v.scaled(SQRT_2) });
        }
    }
    (side, svec)
}

fn layout_l(layout: &OpfLayout, k: usize) -> CExprMatrix {
    let h = &layout.branch_l[k];
    CExprMatrix::from_fn(h.n, h.n, |r, c| h.expr(r, c))
}

/// `V_i` restricted to the phases of branch `k`.
fn projected_v(net: &NetworkModel, layout: &OpfLayout, i: usize, k: usize) -> CExprMatrix {
    let ph = net.branches()[k].phases;
    let pos: Vec<usize> = ph.iter().map(|p| net.nodes()[i].phases.position(p).unwrap()).collect();
    CExprMatrix::from_fn(pos.len(), pos.len(), |r, c| layout.node_v[i].expr(pos[r], pos[c]))
}
