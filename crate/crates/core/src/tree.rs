//! Growth of a single piecewise linear regression tree.
//!
//! Leaves are expanded best-first. Each new leaf fits its linear model in closed form and
//! immediately evaluates its best split from histograms, so the tree can always pick the
//! leaf whose split reduces the second-order objective the most.
//!
//! How a child leaf fits its model depends on [`FittingMode`]:
//!
//! | mode               | design columns                                  |
//! |--------------------|-------------------------------------------------|
//! | `constant`         | intercept                                       |
//! | `additive`         | intercept, split feature (parent part fixed)    |
//! | `half_additive`    | intercept, parent linear part (scaled), split feature |
//! | `fully_corrective` | intercept, every regressor                      |
//!
//! All feature values seen during training are bin averages, so fits derived from
//! histograms and fits computed directly from samples solve the same system.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::data::{BinnedDataset, FeatureScale};
use crate::error::Result;
use crate::hist::{self, build_bitvector, construct_histogram, partition_layout, tri_index, LeafBinLayout};
use crate::linfit::{min_loss_only, solve_ridge, LeafSolution, NormalSystem};
use crate::objective::GradPair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FittingMode {
    Constant,
    Additive,
    HalfAdditive,
    FullyCorrective,
}

impl std::str::FromStr for FittingMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "constant" => Ok(FittingMode::Constant),
            "additive" => Ok(FittingMode::Additive),
            "half_additive" => Ok(FittingMode::HalfAdditive),
            "fully_corrective" => Ok(FittingMode::FullyCorrective),
            other => Err(format!("unknown leaf_type {other:?}")),
        }
    }
}

impl std::fmt::Display for FittingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FittingMode::Constant => "constant",
            FittingMode::Additive => "additive",
            FittingMode::HalfAdditive => "half_additive",
            FittingMode::FullyCorrective => "fully_corrective",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_leaf: usize,
    pub min_sum_hessian: f64,
    pub lambda: f64,
    pub mode: FittingMode,
    pub max_vars: usize,
}

impl TreeParams {
    /// `max_vars = 0` leaves no room for regressors.
    pub fn effective_mode(&self) -> FittingMode {
        if self.max_vars == 0 {
            FittingMode::Constant
        } else {
            self.mode
        }
    }
}

/// One column of a leaf's design matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Term {
    /// Intercept.
    One,
    /// The `a`-th regressor term carried by the parent leaf.
    Z(usize),
    /// The split feature of the new leaf.
    Q,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Design {
    pub terms: SmallVec<[Term; 8]>,
    /// Parent term held fixed with coefficient 1 (additive fitting).
    pub offset: Option<usize>,
    /// The split feature joins the regressor list.
    pub adds_q: bool,
}

impl Design {
    fn intercept_only() -> Self {
        Design { terms: SmallVec::from_slice(&[Term::One]), offset: None, adds_q: false }
    }

    pub fn dim(&self) -> usize {
        self.terms.len()
    }
}

/// Design of a child created by splitting a leaf with the given regressors on `split`.
pub fn child_design(
    mode: FittingMode,
    regressors: &[usize],
    has_linear: bool,
    split: Option<usize>,
    max_vars: usize,
) -> Design {
    let Some(q) = split else {
        return Design::intercept_only();
    };
    let present = regressors.contains(&q);
    let room = regressors.len() < max_vars;
    let mut terms: SmallVec<[Term; 8]> = SmallVec::new();
    terms.push(Term::One);
    let mut offset = None;
    let mut adds_q = false;
    match mode {
        FittingMode::Constant => {}
        FittingMode::Additive => {
            if has_linear {
                offset = Some(0);
            }
            if present || room {
                terms.push(Term::Q);
                adds_q = !present;
            }
        }
        FittingMode::HalfAdditive => {
            if has_linear {
                terms.push(Term::Z(0));
            }
            if present || room {
                terms.push(Term::Q);
                adds_q = !present;
            }
        }
        FittingMode::FullyCorrective => {
            terms.extend((0..regressors.len()).map(Term::Z));
            if !present && room {
                terms.push(Term::Q);
                adds_q = true;
            }
        }
    }
    Design { terms, offset, adds_q }
}

/// Aggregated second-order statistics of a sample set with `t` parent terms `z` and the
/// split-feature value `q`. Flat layout:
/// `[count, sum g, sum h, sum g z (t), sum h z (t), sum h z z^T (tri),
///   sum g q, sum h q, sum h q^2, sum h q z (t)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    t: usize,
    v: Vec<f64>,
}

impl Moments {
    pub fn zeros(t: usize) -> Self {
        Moments { t, v: vec![0.0; 1 + hist::Histogram::width_for(t) + 3 + t] }
    }

    #[inline]
    fn q_base(&self) -> usize {
        1 + hist::Histogram::width_for(self.t)
    }

    pub fn count(&self) -> f64 {
        self.v[0]
    }

    pub fn sum_g(&self) -> f64 {
        self.v[1]
    }

    pub fn sum_h(&self) -> f64 {
        self.v[2]
    }

    /// Adds one histogram bin whose feature value is the bin average `xbar`.
    #[inline]
    pub fn add_bin(&mut self, count: u32, row: &[f64], xbar: f64) {
        let t = self.t;
        self.v[0] += f64::from(count);
        for (dst, src) in self.v[1..].iter_mut().zip(row) {
            *dst += src;
        }
        let qb = self.q_base();
        self.v[qb] += xbar * row[0];
        self.v[qb + 1] += xbar * row[1];
        self.v[qb + 2] += xbar * xbar * row[1];
        for a in 0..t {
            self.v[qb + 3 + a] += xbar * row[2 + t + a];
        }
    }

    /// Adds one sample directly.
    #[inline]
    pub fn add_sample(&mut self, g: f64, h: f64, z: &[f64], q: f64) {
        let t = self.t;
        self.v[0] += 1.0;
        self.v[1] += g;
        self.v[2] += h;
        for a in 0..t {
            self.v[3 + a] += g * z[a];
            self.v[3 + t + a] += h * z[a];
        }
        let base = 3 + 2 * t;
        for a in 0..t {
            for b in 0..=a {
                self.v[base + tri_index(a, b)] += h * z[a] * z[b];
            }
        }
        let qb = self.q_base();
        self.v[qb] += g * q;
        self.v[qb + 1] += h * q;
        self.v[qb + 2] += h * q * q;
        for a in 0..t {
            self.v[qb + 3 + a] += h * q * z[a];
        }
    }

    /// `self = total - left`.
    #[inline]
    pub fn set_difference(&mut self, total: &Moments, left: &Moments) {
        for ((d, a), b) in self.v.iter_mut().zip(&total.v).zip(&left.v) {
            *d = a - b;
        }
    }

    #[inline]
    fn hh(&self, r: Term, c: Term) -> f64 {
        let t = self.t;
        let qb = self.q_base();
        match (r, c) {
            (Term::One, Term::One) => self.v[2],
            (Term::One, Term::Z(a)) | (Term::Z(a), Term::One) => self.v[3 + t + a],
            (Term::One, Term::Q) | (Term::Q, Term::One) => self.v[qb + 1],
            (Term::Z(a), Term::Z(b)) => self.v[3 + 2 * t + tri_index(a.max(b), a.min(b))],
            (Term::Z(a), Term::Q) | (Term::Q, Term::Z(a)) => self.v[qb + 3 + a],
            (Term::Q, Term::Q) => self.v[qb + 2],
        }
    }

    #[inline]
    fn gt(&self, r: Term) -> f64 {
        match r {
            Term::One => self.v[1],
            Term::Z(a) => self.v[3 + a],
            Term::Q => self.v[self.q_base()],
        }
    }

    /// Normal system of the design plus the constant contributed by a fixed offset term.
    pub fn system(&self, design: &Design) -> (NormalSystem, f64) {
        let d = design.dim();
        let mut sys = NormalSystem::zeros(d);
        for (r, &tr) in design.terms.iter().enumerate() {
            for (c, &tc) in design.terms.iter().enumerate().take(r + 1) {
                sys.set_sym(r, c, self.hh(tr, tc));
            }
            sys.b[r] = self.gt(tr);
        }
        let mut constant = 0.0;
        if let Some(a) = design.offset {
            for (r, &tr) in design.terms.iter().enumerate() {
                sys.b[r] += self.hh(tr, Term::Z(a));
            }
            constant = 0.5 * self.hh(Term::Z(a), Term::Z(a)) + self.gt(Term::Z(a));
        }
        (sys, constant)
    }
}

/// Flattened linear model of a leaf: `intercept + sum coefficients[f] * x_f`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LeafModel {
    pub intercept: f64,
    /// Written as `[feature, coefficient]` pairs.
    #[serde(with = "coefficient_pairs")]
    pub coefficients: BTreeMap<usize, f64>,
    /// Parameters of the last closed-form fit, in design order (intercept first).
    #[serde(skip)]
    pub params: Vec<f64>,
}

mod coefficient_pairs {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(map: &BTreeMap<usize, f64>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(map.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<usize, f64>, D::Error> {
        Ok(Vec::<(usize, f64)>::deserialize(d)?.into_iter().collect())
    }
}

impl LeafModel {
    #[inline]
    pub fn eval(&self, row: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().map(|(&f, &c)| c * row[f]).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split { feature: usize, threshold: f64, boundary_bin: u8, left: usize, right: usize },
    Leaf { model: LeafModel },
}

/// Piecewise linear tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PLTree {
    pub nodes: Vec<Node>,
}

impl PLTree {
    /// Node id of the leaf reached by an already rescaled row.
    pub fn leaf_of(&self, row: &[f64]) -> usize {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Split { feature, threshold, left, right, .. } => {
                    id = if row[*feature] <= *threshold { *left } else { *right };
                }
                Node::Leaf { .. } => return id,
            }
        }
    }

    /// Output for an already rescaled row.
    pub fn predict_scaled(&self, row: &[f64]) -> f64 {
        match &self.nodes[self.leaf_of(row)] {
            Node::Leaf { model } => model.eval(row),
            Node::Split { .. } => unreachable!("leaf_of returns leaves"),
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

/// Rescales `row` with `scale`, then traverses the tree.
pub fn predict_tree(tree: &PLTree, row: &[f64], scale: &FeatureScale) -> f64 {
    let mut scaled = row.to_vec();
    scale.transform_row(&mut scaled);
    tree.predict_scaled(&scaled)
}

/// What a leaf inherited from its parent at split time, aligned with the leaf's samples.
#[derive(Debug, Clone, Default)]
pub struct Inherited {
    pub coefficients: BTreeMap<usize, f64>,
    pub regressors: Vec<usize>,
    pub has_linear: bool,
    pub split_feature: Option<usize>,
    /// Parent regressor terms per sample, row-major `len x n_terms`.
    pub z: Vec<f64>,
    pub n_terms: usize,
}

#[derive(Debug, Clone)]
pub struct ChildFit {
    pub design: Design,
    pub solution: LeafSolution,
    pub offset_const: f64,
    pub min_loss: f64,
    pub sum_h: f64,
    pub count: usize,
}

#[derive(Debug, Clone)]
pub struct SplitCandidate {
    pub feature: usize,
    pub boundary_bin: u8,
    /// Upper bound of the boundary bin; rows with `x <= raw_threshold` go left.
    pub raw_threshold: f64,
    pub gain: f64,
    pub left: ChildFit,
    pub right: ChildFit,
}

/// A leaf during growth.
#[derive(Debug, Clone)]
pub struct LeafContext {
    pub node: usize,
    pub layout: LeafBinLayout,
    /// Gradients and hessians in layout order.
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    pub inherited: Inherited,
    /// Linear part of the model (no intercept) at each sample's bin-averaged values.
    pub p: Vec<f64>,
    /// Regressor terms handed to this leaf's children, row-major `len x n_terms`.
    pub z: Vec<f64>,
    pub n_terms: usize,
    pub regressors: Vec<usize>,
    pub model: LeafModel,
    pub min_loss: f64,
    pub sum_h: f64,
    pub best_split: Option<SplitCandidate>,
}

impl LeafContext {
    /// Root leaf holding every sample, not yet fitted.
    pub fn root(data: &BinnedDataset, grads: &[GradPair]) -> Self {
        let layout = LeafBinLayout::root(&data.bins);
        LeafContext {
            node: 0,
            layout,
            g: grads.iter().map(|gp| gp.g).collect(),
            h: grads.iter().map(|gp| gp.h).collect(),
            inherited: Inherited::default(),
            p: Vec::new(),
            z: Vec::new(),
            n_terms: 0,
            regressors: Vec::new(),
            model: LeafModel::default(),
            min_loss: 0.0,
            sum_h: 0.0,
            best_split: None,
        }
    }

    pub fn len(&self) -> usize {
        self.layout.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layout.is_empty()
    }

    fn has_linear(&self) -> bool {
        !self.model.coefficients.is_empty()
    }

    /// Objective of the installed model evaluated sample by sample.
    pub fn direct_loss(&self, lambda: f64) -> f64 {
        let fit: f64 = (0..self.len())
            .map(|i| {
                let f = self.model.intercept + self.p[i];
                0.5 * self.h[i] * f * f + self.g[i] * f
            })
            .sum();
        fit + 0.5 * lambda * self.model.params.iter().map(|a| a * a).sum::<f64>()
    }
}

fn split_values(data: &BinnedDataset, layout: &LeafBinLayout, q: Option<usize>) -> Vec<f64> {
    match q {
        Some(q) => layout.bins[q].iter().map(|&b| data.mapper.bin_avg(q, b)).collect(),
        None => vec![0.0; layout.len()],
    }
}

/// Installs a solved design: flattened model, per-sample linear part, child terms, loss.
fn install_fit(
    leaf: &mut LeafContext,
    data: &BinnedDataset,
    mode: FittingMode,
    design: &Design,
    solution: &LeafSolution,
    min_loss: f64,
) {
    let inh = &leaf.inherited;
    let n = leaf.len();
    let t_in = inh.n_terms;
    let q = inh.split_feature;
    let qvals = if design.terms.contains(&Term::Q) || (mode == FittingMode::FullyCorrective && design.adds_q) {
        split_values(data, &leaf.layout, q)
    } else {
        Vec::new()
    };

    let mut model = LeafModel { params: solution.alpha.clone(), ..LeafModel::default() };
    if let Some(a) = design.offset {
        debug_assert_eq!(a, 0);
        model.coefficients = inh.coefficients.clone();
    }
    let mut p = vec![0.0; n];
    if design.offset.is_some() {
        for (i, pi) in p.iter_mut().enumerate() {
            *pi = inh.z[i * t_in];
        }
    }
    for (k, &term) in design.terms.iter().enumerate() {
        let coef = solution.alpha[k];
        match term {
            Term::One => model.intercept = coef,
            Term::Z(a) => {
                if mode == FittingMode::FullyCorrective {
                    *model.coefficients.entry(inh.regressors[a]).or_insert(0.0) += coef;
                } else {
                    // combined parent regressor: rescales every inherited coefficient
                    for (&f, &c) in &inh.coefficients {
                        *model.coefficients.entry(f).or_insert(0.0) += coef * c;
                    }
                }
                for (i, pi) in p.iter_mut().enumerate() {
                    *pi += coef * inh.z[i * t_in + a];
                }
            }
            Term::Q => {
                *model.coefficients.entry(q.expect("split feature")).or_insert(0.0) += coef;
                for (pi, &x) in p.iter_mut().zip(&qvals) {
                    *pi += coef * x;
                }
            }
        }
    }

    let mut regressors = if mode == FittingMode::Constant { Vec::new() } else { inh.regressors.clone() };
    if design.adds_q {
        regressors.push(q.expect("split feature"));
    }

    let (z, n_terms) = match mode {
        FittingMode::Constant => (Vec::new(), 0),
        FittingMode::Additive | FittingMode::HalfAdditive => (p.clone(), 1),
        FittingMode::FullyCorrective => {
            let t = regressors.len();
            let mut z = Vec::with_capacity(n * t);
            for i in 0..n {
                z.extend_from_slice(&inh.z[i * t_in..(i + 1) * t_in]);
                if design.adds_q {
                    z.push(qvals[i]);
                }
            }
            (z, t)
        }
    };

    leaf.sum_h = leaf.h.iter().sum();
    leaf.model = model;
    leaf.p = p;
    leaf.z = z;
    leaf.n_terms = n_terms;
    leaf.regressors = regressors;
    leaf.min_loss = min_loss;
}

/// Fits the leaf's model in closed form from its own samples and installs it.
pub fn fit_node(leaf: &mut LeafContext, data: &BinnedDataset, params: &TreeParams) -> Result<LeafSolution> {
    let mode = params.effective_mode();
    let inh = &leaf.inherited;
    let design = child_design(mode, &inh.regressors, inh.has_linear, inh.split_feature, params.max_vars);
    let qvals = split_values(data, &leaf.layout, inh.split_feature);
    let t = inh.n_terms;
    let mut mom = Moments::zeros(t);
    for i in 0..leaf.len() {
        mom.add_sample(leaf.g[i], leaf.h[i], &inh.z[i * t..(i + 1) * t], qvals[i]);
    }
    let (sys, constant) = mom.system(&design);
    let solution = solve_ridge(&sys, params.lambda)?;
    let min_loss = solution.min_loss + constant;
    install_fit(leaf, data, mode, &design, &solution, min_loss);
    Ok(solution)
}

/// Relative margin below which two gains count as tied.
pub const GAIN_TIE_TOL: f64 = 1e-10;

/// Whether `gain` is strictly better than `best` beyond rounding noise.
#[inline]
pub fn beats(gain: f64, best: f64) -> bool {
    gain > best && gain - best > GAIN_TIE_TOL * best.abs()
}

fn child_fit(mom: &Moments, design: &Design, lambda: f64) -> Option<ChildFit> {
    let (sys, constant) = mom.system(design);
    let solution = solve_ridge(&sys, lambda).ok()?;
    Some(ChildFit {
        design: design.clone(),
        min_loss: solution.min_loss + constant,
        solution,
        offset_const: constant,
        sum_h: mom.sum_h(),
        count: mom.count() as usize,
    })
}

/// Best split of one feature on a leaf: `(gain, boundary, left moments, right moments)`.
fn best_for_feature(
    leaf: &LeafContext,
    data: &BinnedDataset,
    feature: usize,
    design: &Design,
    params: &TreeParams,
) -> Option<(f64, usize, Moments, Moments)> {
    let fb = &data.mapper.features[feature];
    let n_bins = fb.n_bins();
    if n_bins < 2 {
        return None;
    }
    let t = leaf.n_terms;
    let hist = construct_histogram(feature, &leaf.layout.bins[feature], n_bins, &leaf.g, &leaf.h, &leaf.z, t);

    let mut total = Moments::zeros(t);
    for b in 0..n_bins {
        total.add_bin(hist.counts[b], hist.bin(b), fb.bin_avg[b]);
    }
    let mut left = Moments::zeros(t);
    let mut right = Moments::zeros(t);
    let mut best: Option<(f64, usize, Moments, Moments)> = None;
    for c in 0..n_bins - 1 {
        left.add_bin(hist.counts[c], hist.bin(c), fb.bin_avg[c]);
        if hist.counts[c] == 0 && c > 0 {
            // same partition as the previous boundary
            continue;
        }
        right.set_difference(&total, &left);
        if left.count() < 1.0 || right.count() < 1.0 {
            continue;
        }
        if left.sum_h() < params.min_sum_hessian || right.sum_h() < params.min_sum_hessian {
            continue;
        }
        let (ls, lc) = left.system(design);
        let (rs, rc) = right.system(design);
        let (Ok(ll), Ok(rl)) = (min_loss_only(&ls, params.lambda), min_loss_only(&rs, params.lambda)) else {
            continue;
        };
        let gain = leaf.min_loss - (ll + lc) - (rl + rc);
        if gain.is_finite() && beats(gain, best.as_ref().map_or(0.0, |b| b.0)) {
            best = Some((gain, c, left.clone(), right.clone()));
        }
    }
    best
}

/// Best split over all features and bin boundaries, or `None` if no split reduces the
/// objective. Ties, up to [`GAIN_TIE_TOL`], go to the lower feature, then the lower boundary.
pub fn eval_splits(leaf: &LeafContext, data: &BinnedDataset, params: &TreeParams) -> Option<SplitCandidate> {
    if leaf.len() < 2 || leaf.sum_h < 2.0 * params.min_sum_hessian {
        return None;
    }
    let mode = params.effective_mode();
    let per_feature: Vec<Option<SplitCandidate>> = (0..data.n_features())
        .into_par_iter()
        .map(|feature| {
            let design = child_design(mode, &leaf.regressors, leaf.has_linear(), Some(feature), params.max_vars);
            let (gain, c, lm, rm) = best_for_feature(leaf, data, feature, &design, params)?;
            Some(SplitCandidate {
                feature,
                boundary_bin: c as u8,
                raw_threshold: data.mapper.features[feature].upper_bounds[c],
                gain,
                left: child_fit(&lm, &design, params.lambda)?,
                right: child_fit(&rm, &design, params.lambda)?,
            })
        })
        .collect();
    per_feature.into_iter().flatten().fold(None, |best: Option<SplitCandidate>, cand| match best {
        Some(b) if !beats(cand.gain, b.gain) => Some(b),
        _ => Some(cand),
    })
}

/// Stable partition of row-major rows of width `t`.
fn partition_rows(src: &[f64], t: usize, bits: &hist::BitVector) -> (Vec<f64>, Vec<f64>) {
    if t == 0 {
        return (Vec::new(), Vec::new());
    }
    let mut left = Vec::with_capacity(bits.count_ones() * t);
    let mut right = Vec::with_capacity(src.len() - bits.count_ones() * t);
    for (i, row) in src.chunks_exact(t).enumerate() {
        if bits.get(i) {
            left.extend_from_slice(row);
        } else {
            right.extend_from_slice(row);
        }
    }
    (left, right)
}

/// Splits a leaf by the candidate and fits both children from their own samples.
pub fn apply_split(
    leaf: &LeafContext,
    cand: &SplitCandidate,
    data: &BinnedDataset,
    params: &TreeParams,
) -> Result<(LeafContext, LeafContext)> {
    let bits = build_bitvector(&leaf.layout.bins[cand.feature], cand.boundary_bin);
    let (layout_l, layout_r) = partition_layout(&leaf.layout, &bits)?;
    let (g_l, g_r) = hist::partition_scalar(&leaf.g, &bits);
    let (h_l, h_r) = hist::partition_scalar(&leaf.h, &bits);
    let (z_l, z_r) = partition_rows(&leaf.z, leaf.n_terms, &bits);

    let make = |layout: LeafBinLayout, g: Vec<f64>, h: Vec<f64>, z: Vec<f64>| -> Result<LeafContext> {
        let mut child = LeafContext {
            node: usize::MAX,
            layout,
            g,
            h,
            inherited: Inherited {
                coefficients: leaf.model.coefficients.clone(),
                regressors: leaf.regressors.clone(),
                has_linear: leaf.has_linear(),
                split_feature: Some(cand.feature),
                z,
                n_terms: leaf.n_terms,
            },
            p: Vec::new(),
            z: Vec::new(),
            n_terms: 0,
            regressors: Vec::new(),
            model: LeafModel::default(),
            min_loss: 0.0,
            sum_h: 0.0,
            best_split: None,
        };
        fit_node(&mut child, data, params)?;
        Ok(child)
    };
    Ok((make(layout_l, g_l, h_l, z_l)?, make(layout_r, g_r, h_r, z_r)?))
}

/// A grown tree together with what the booster needs from training.
#[derive(Debug)]
pub struct GrownTree {
    pub tree: PLTree,
    /// Tree output per training row, evaluated on bin-averaged values.
    pub train_output: Vec<f64>,
    /// Leaf node id per training row.
    pub leaf_of_row: Vec<usize>,
    /// Gain of every accepted split, in order.
    pub gains: Vec<f64>,
    pub leaves: Vec<LeafContext>,
}

/// Best-first growth until `max_leaf` leaves exist or no leaf has an acceptable split.
pub fn grow_tree(data: &BinnedDataset, grads: &[GradPair], params: &TreeParams) -> Result<GrownTree> {
    let mut root = LeafContext::root(data, grads);
    fit_node(&mut root, data, params)?;
    root.best_split = eval_splits(&root, data, params);

    let mut nodes = vec![Node::Leaf { model: root.model.clone() }];
    let mut leaves = vec![root];
    let mut gains = Vec::new();

    while leaves.len() < params.max_leaf.max(1) {
        let pick = leaves.iter().enumerate().filter_map(|(k, l)| l.best_split.as_ref().map(|c| (k, c.gain))).fold(
            None,
            |best: Option<(usize, f64)>, (k, g)| match best {
                Some((_, bg)) if !beats(g, bg) => best,
                _ => Some((k, g)),
            },
        );
        let Some((k, _)) = pick else { break };

        let parent = leaves.swap_remove(k);
        let cand = parent.best_split.as_ref().expect("picked leaf has a split");
        let (mut left, mut right) = apply_split(&parent, cand, data, params)?;
        gains.push(cand.gain);

        let (l_id, r_id) = (nodes.len(), nodes.len() + 1);
        nodes[parent.node] = Node::Split {
            feature: cand.feature,
            threshold: cand.raw_threshold,
            boundary_bin: cand.boundary_bin,
            left: l_id,
            right: r_id,
        };
        left.node = l_id;
        right.node = r_id;
        nodes.push(Node::Leaf { model: left.model.clone() });
        nodes.push(Node::Leaf { model: right.model.clone() });

        left.best_split = eval_splits(&left, data, params);
        right.best_split = eval_splits(&right, data, params);
        // creation order, so ties between leaves resolve to the older leaf
        leaves.push(left);
        leaves.push(right);
        leaves.sort_by_key(|l| l.node);
    }

    let n = data.n_rows();
    let mut train_output = vec![0.0; n];
    let mut leaf_of_row = vec![0; n];
    for leaf in &leaves {
        for (i, &id) in leaf.layout.index.iter().enumerate() {
            train_output[id as usize] = leaf.model.intercept + leaf.p[i];
            leaf_of_row[id as usize] = leaf.node;
        }
    }
    Ok(GrownTree { tree: PLTree { nodes }, train_output, leaf_of_row, gains, leaves })
}
