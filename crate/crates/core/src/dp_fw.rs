//! Binary-tree gradient estimation for Frank-Wolfe on the simplex.
//!
//! A phase runs `T1` binary trees; tree `j` has depth `j`. Vertices are visited
//! in DFS order (left before right). A root estimates the gradient on a fresh
//! batch of `b` losses, a left child copies its parent, and a right child
//! corrects its parent's estimate on a fresh batch of `b/2^|s|` losses:
//!
//! `v_s = v_parent + ∇l(x_current; B_s) − ∇l(x_parent; B_s)`.
//!
//! Every leaf is a communication point: the caller reads the leaf's estimate,
//! obtains a simplex vertex from the server and feeds it back through
//! [`DpFw::apply_downlink`], which takes a Frank-Wolfe step of size
//! `2/(k+1)` (`k` = leaf index within the phase, starting at 1).

use std::fmt;
use std::sync::Arc;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{batch_gradient, LossRef};
use crate::rng::Rng;
use crate::simplex::{convex_combination, SimplexPoint};

/// Position of a vertex: tree index `j` (1-based) and the 0/1 path from the
/// root (`false` = left).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TreeAddress {
    pub tree: usize,
    pub path: Vec<bool>,
}

impl TreeAddress {
    pub fn root(tree: usize) -> Self {
        Self {
            tree,
            path: Vec::new(),
        }
    }

    pub fn depth(&self) -> usize {
        self.path.len()
    }

    fn child(&self, right: bool) -> Self {
        let mut path = self.path.clone();
        path.push(right);
        Self {
            tree: self.tree,
            path,
        }
    }
}

impl fmt::Display for TreeAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.tree)?;
        if self.path.is_empty() {
            return f.write_str("∅");
        }
        for bit in &self.path {
            f.write_str(if *bit { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VertexKind {
    Root,
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanStep {
    pub address: TreeAddress,
    pub kind: VertexKind,
    pub is_leaf: bool,
}

/// DFS visitation order over all trees of a phase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraversalPlan {
    trees: usize,
    steps: Vec<PlanStep>,
    leaf_count: usize,
}

impl TraversalPlan {
    pub fn trees(&self) -> usize {
        self.trees
    }

    pub fn steps(&self) -> &[PlanStep] {
        &self.steps
    }

    /// `Σ_{j=1}^{T1} 2^j = 2^{T1+1} − 2`.
    pub fn leaf_count(&self) -> usize {
        self.leaf_count
    }
}

/// Largest supported number of trees; the plan has `2^{T1+2}` steps.
pub const MAX_TREES: usize = 24;

pub fn plan_trees(trees: usize) -> Result<TraversalPlan> {
    if trees < 1 {
        return Err(Error::param("at least one tree is required"));
    }
    if trees > MAX_TREES {
        return Err(Error::param(format!(
            "{trees} trees exceeds the supported maximum of {MAX_TREES}"
        )));
    }
    fn descend(node: &TreeAddress, depth: usize, steps: &mut Vec<PlanStep>) {
        for right in [false, true] {
            let child = node.child(right);
            let is_leaf = child.depth() == depth;
            steps.push(PlanStep {
                address: child.clone(),
                kind: if right {
                    VertexKind::Right
                } else {
                    VertexKind::Left
                },
                is_leaf,
            });
            if !is_leaf {
                descend(&child, depth, steps);
            }
        }
    }
    let mut steps = Vec::new();
    for j in 1..=trees {
        let root = TreeAddress::root(j);
        steps.push(PlanStep {
            address: root.clone(),
            kind: VertexKind::Root,
            is_leaf: false,
        });
        descend(&root, j, &mut steps);
    }
    let leaf_count = steps.iter().filter(|s| s.is_leaf).count();
    Ok(TraversalPlan {
        trees,
        steps,
        leaf_count,
    })
}

/// `⌊b / 2^depth⌋`, which must be at least one.
pub fn batch_size(depth: usize, b: usize) -> Result<usize> {
    let size = if depth >= usize::BITS as usize {
        0
    } else {
        b >> depth
    };
    if size < 1 {
        return Err(Error::Allocation(format!(
            "batch of ⌊{b}/2^{depth}⌋ = 0 losses at depth {depth}"
        )));
    }
    Ok(size)
}

/// Uniform sample without replacement of `⌊b/2^depth⌋` indices into a dataset
/// of `dataset_len` losses.
pub fn allocate_batch(
    dataset_len: usize,
    depth: usize,
    b: usize,
    rng: &mut Rng,
) -> Result<Vec<usize>> {
    let size = batch_size(depth, b)?;
    sample_indices(dataset_len, size, rng)
}

fn sample_indices(dataset_len: usize, size: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    if size > dataset_len {
        return Err(Error::Allocation(format!(
            "batch of {size} losses requested from a dataset of {dataset_len}"
        )));
    }
    let mut picked = index::sample(rng, dataset_len, size).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

/// Iterate, gradient estimate and batch held at a vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexState {
    pub x: SimplexPoint,
    pub v: Vec<f64>,
    /// Indices into the phase dataset; left children share their parent's.
    pub batch: Arc<[usize]>,
}

/// Applies the root / left / right update rule.
pub fn vertex_update(
    kind: VertexKind,
    parent: Option<&VertexState>,
    x_current: &SimplexPoint,
    dataset: &[LossRef],
    batch: Arc<[usize]>,
) -> Result<VertexState> {
    match (kind, parent) {
        (VertexKind::Root, None) => Ok(VertexState {
            v: batch_gradient(dataset, &batch, x_current),
            x: x_current.clone(),
            batch,
        }),
        (VertexKind::Root, Some(_)) => Err(Error::State("a root vertex has no parent".into())),
        (VertexKind::Left, Some(p)) => Ok(p.clone()),
        (VertexKind::Right, Some(p)) => {
            let at_current = batch_gradient(dataset, &batch, x_current);
            let at_parent = batch_gradient(dataset, &batch, &p.x);
            let v =
                p.v.iter()
                    .zip(at_current.iter().zip(&at_parent))
                    .map(|(vp, (gc, gp))| vp + gc - gp)
                    .collect();
            Ok(VertexState {
                x: x_current.clone(),
                v,
                batch,
            })
        }
        (kind, None) => Err(Error::State(format!(
            "{kind:?} child visited without a parent"
        ))),
    }
}

/// How vertex batches are drawn.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BatchMode {
    /// `max(1, ⌊b/2^|s|⌋)` losses sampled without replacement per root/right vertex.
    #[default]
    Sampled,
    /// Every vertex uses the whole dataset (reference / oracle runs).
    Full,
}

/// Gradient estimate released at a leaf, awaiting the server's vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Leaf {
    pub address: TreeAddress,
    /// Leaf index within the phase, starting at 1.
    pub k: usize,
    pub v: Vec<f64>,
}

/// One visited vertex, kept when recording is enabled.
#[derive(Debug, Clone, PartialEq)]
pub struct VisitRecord {
    pub address: TreeAddress,
    pub kind: VertexKind,
    pub x: SimplexPoint,
    pub v: Vec<f64>,
    pub batch_len: usize,
}

/// One client's DP-FW pass over its phase dataset.
#[derive(Debug)]
pub struct DpFw {
    dataset: Vec<LossRef>,
    plan: Arc<TraversalPlan>,
    b: usize,
    batch_mode: BatchMode,
    cursor: usize,
    stack: Vec<VertexState>,
    x: SimplexPoint,
    leaves_done: usize,
    pending: Option<usize>,
    record: Option<Vec<VisitRecord>>,
}

impl DpFw {
    /// `b` is the effective root batch size and may not exceed the dataset.
    pub fn new(
        dataset: Vec<LossRef>,
        plan: Arc<TraversalPlan>,
        b: usize,
        x_init: SimplexPoint,
        batch_mode: BatchMode,
    ) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::Allocation("empty phase dataset".into()));
        }
        if b < 1 || (batch_mode == BatchMode::Sampled && b > dataset.len()) {
            return Err(Error::Allocation(format!(
                "root batch {b} incompatible with a dataset of {}",
                dataset.len()
            )));
        }
        if let Some(l) = dataset.iter().find(|l| l.dim() != x_init.dim()) {
            return Err(Error::shape(format!(
                "loss of dimension {} for iterate of dimension {}",
                l.dim(),
                x_init.dim()
            )));
        }
        Ok(Self {
            dataset,
            plan,
            b,
            batch_mode,
            cursor: 0,
            stack: Vec::new(),
            x: x_init,
            leaves_done: 0,
            pending: None,
            record: None,
        })
    }

    /// Keep a [`VisitRecord`] for every vertex.
    pub fn with_recording(mut self) -> Self {
        self.record = Some(Vec::new());
        self
    }

    pub fn iterate(&self) -> &SimplexPoint {
        &self.x
    }

    pub fn visits(&self) -> &[VisitRecord] {
        self.record.as_deref().unwrap_or(&[])
    }

    pub fn leaves_done(&self) -> usize {
        self.leaves_done
    }

    /// Batch size used at depth `depth`: `max(1, ⌊b/2^depth⌋)`.
    pub fn vertex_batch_size(&self, depth: usize) -> usize {
        match self.batch_mode {
            BatchMode::Full => self.dataset.len(),
            BatchMode::Sampled => batch_size(depth, self.b).unwrap_or(1),
        }
    }

    fn draw_batch(&self, depth: usize, rng: &mut Rng) -> Result<Arc<[usize]>> {
        let size = self.vertex_batch_size(depth);
        let picked = match self.batch_mode {
            BatchMode::Full => (0..self.dataset.len()).collect(),
            BatchMode::Sampled => sample_indices(self.dataset.len(), size, rng)?,
        };
        if picked.len() != size {
            return Err(Error::Allocation(format!(
                "vertex at depth {depth} got {} losses, expected {size}",
                picked.len()
            )));
        }
        Ok(picked.into())
    }

    /// Advances the DFS to the next leaf and returns its estimate, or `None`
    /// once every tree has been visited.
    pub fn next_leaf(&mut self, rng: &mut Rng) -> Result<Option<Leaf>> {
        if self.pending.is_some() {
            return Err(Error::protocol(
                "next leaf requested before the previous leaf's downlink arrived",
            ));
        }
        while self.cursor < self.plan.steps().len() {
            let step = self.plan.steps()[self.cursor].clone();
            self.cursor += 1;
            let depth = step.address.depth();
            let state = match step.kind {
                VertexKind::Root => {
                    self.stack.clear();
                    let batch = self.draw_batch(0, rng)?;
                    vertex_update(VertexKind::Root, None, &self.x, &self.dataset, batch)?
                }
                VertexKind::Left => {
                    let parent = &self.stack[depth - 1];
                    let batch = parent.batch.clone();
                    vertex_update(
                        VertexKind::Left,
                        Some(parent),
                        &self.x,
                        &self.dataset,
                        batch,
                    )?
                }
                VertexKind::Right => {
                    let batch = self.draw_batch(depth, rng)?;
                    let parent = &self.stack[depth - 1];
                    vertex_update(
                        VertexKind::Right,
                        Some(parent),
                        &self.x,
                        &self.dataset,
                        batch,
                    )?
                }
            };
            self.stack.truncate(depth);
            if let Some(rec) = self.record.as_mut() {
                rec.push(VisitRecord {
                    address: step.address.clone(),
                    kind: step.kind,
                    x: state.x.clone(),
                    v: state.v.clone(),
                    batch_len: state.batch.len(),
                });
            }
            let v = step.is_leaf.then(|| state.v.clone());
            self.stack.push(state);
            if let Some(v) = v {
                let k = self.leaves_done + 1;
                self.pending = Some(k);
                return Ok(Some(Leaf {
                    address: step.address,
                    k,
                    v,
                }));
            }
        }
        Ok(None)
    }

    /// Frank-Wolfe step toward vertex `expert` (1-indexed) with `η = 2/(k+1)`.
    pub fn apply_downlink(&mut self, expert: usize) -> Result<()> {
        let k = self
            .pending
            .take()
            .ok_or_else(|| Error::protocol("downlink received with no leaf outstanding"))?;
        let target = SimplexPoint::vertex(expert, self.x.dim())?;
        self.x = convex_combination(&self.x, &target, step_size(k))?;
        self.leaves_done = k;
        Ok(())
    }

    /// Final iterate; every leaf must have been answered.
    pub fn finish(self) -> Result<SimplexPoint> {
        if self.pending.is_some() || self.cursor < self.plan.steps().len() {
            return Err(Error::protocol(format!(
                "phase finished after {} of {} leaves",
                self.leaves_done,
                self.plan.leaf_count()
            )));
        }
        Ok(self.x)
    }

    /// Runs the whole traversal, answering each leaf with `server`.
    pub fn drive<F>(
        mut self,
        rng: &mut Rng,
        mut server: F,
    ) -> Result<(SimplexPoint, Vec<VisitRecord>)>
    where
        F: FnMut(&Leaf) -> Result<usize>,
    {
        while let Some(leaf) = self.next_leaf(rng)? {
            let n = server(&leaf)?;
            self.apply_downlink(n)?;
        }
        let visits = self.record.take().unwrap_or_default();
        Ok((self.finish()?, visits))
    }
}

/// Frank-Wolfe step size at leaf `k`: `2/(k+1)`.
pub fn step_size(k: usize) -> f64 {
    2.0 / (k as f64 + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::LinearLoss;
    use crate::mechanisms::argmin;
    use crate::rng::{RandomSource, StreamTag};

    fn rng() -> Rng {
        RandomSource::new(3).stream(StreamTag::Custom(2), &[])
    }

    fn addr(tree: usize, bits: &str) -> TreeAddress {
        TreeAddress {
            tree,
            path: bits.chars().map(|c| c == '1').collect(),
        }
    }

    #[test]
    fn plan_single_tree() {
        let plan = plan_trees(1).unwrap();
        let got: Vec<_> = plan
            .steps()
            .iter()
            .map(|s| (s.address.clone(), s.kind, s.is_leaf))
            .collect();
        assert_eq!(
            got,
            vec![
                (addr(1, ""), VertexKind::Root, false),
                (addr(1, "0"), VertexKind::Left, true),
                (addr(1, "1"), VertexKind::Right, true),
            ]
        );
        assert_eq!(plan.leaf_count(), 2);
    }

    #[test]
    fn plan_two_trees_dfs_order() {
        let plan = plan_trees(2).unwrap();
        assert_eq!(plan.leaf_count(), 6);
        let order: Vec<String> = plan.steps().iter().map(|s| s.address.to_string()).collect();
        assert_eq!(
            order,
            ["1:∅", "1:0", "1:1", "2:∅", "2:0", "2:00", "2:01", "2:1", "2:10", "2:11"]
        );
    }

    #[test]
    fn plan_rejects_zero_trees() {
        assert!(matches!(plan_trees(0), Err(Error::Parameter(_))));
    }

    #[test]
    fn leaf_count_closed_form() {
        for t1 in 1..=8 {
            assert_eq!(plan_trees(t1).unwrap().leaf_count(), (1 << (t1 + 1)) - 2);
        }
    }

    #[test]
    fn batch_sizes() {
        let mut r = rng();
        assert_eq!(allocate_batch(10, 2, 8, &mut r).unwrap().len(), 2);
        assert_eq!(allocate_batch(10, 0, 8, &mut r).unwrap().len(), 8);
        let t1 = 3;
        assert_eq!(allocate_batch(8, t1, 1 << t1, &mut r).unwrap().len(), 1);
        assert!(matches!(
            allocate_batch(10, 4, 8, &mut r),
            Err(Error::Allocation(_))
        ));
        assert!(matches!(
            allocate_batch(4, 0, 8, &mut r),
            Err(Error::Allocation(_))
        ));
    }

    #[test]
    fn batch_without_replacement() {
        let mut r = rng();
        let b = allocate_batch(20, 0, 20, &mut r).unwrap();
        assert_eq!(b, (0..20).collect::<Vec<_>>());
    }

    fn linear(coef: &[f64]) -> LossRef {
        Arc::new(LinearLoss::new(coef.to_vec()))
    }

    #[test]
    fn vertex_rules() {
        let data = vec![linear(&[0.3, 0.9]), linear(&[0.5, 0.1])];
        let x = SimplexPoint::uniform(2).unwrap();
        let root =
            vertex_update(VertexKind::Root, None, &x, &data[..1], Arc::from(vec![0])).unwrap();
        assert_eq!(root.v, vec![0.3, 0.9]);

        let left =
            vertex_update(VertexKind::Left, Some(&root), &x, &data, root.batch.clone()).unwrap();
        assert_eq!(left, root);

        let right = vertex_update(
            VertexKind::Right,
            Some(&root),
            &root.x,
            &data,
            Arc::from(vec![1]),
        )
        .unwrap();
        assert!(right
            .v
            .iter()
            .zip(&root.v)
            .all(|(a, b)| (a - b).abs() < 1e-15));

        assert!(matches!(
            vertex_update(VertexKind::Right, None, &x, &data, Arc::from(vec![1])),
            Err(Error::State(_))
        ));
        assert!(vertex_update(VertexKind::Left, None, &x, &data, Arc::from(vec![0])).is_err());
    }

    #[test]
    fn protocol_errors() {
        let data = vec![linear(&[0.3, 0.9]); 4];
        let plan = Arc::new(plan_trees(1).unwrap());
        let x = SimplexPoint::uniform(2).unwrap();
        let mut r = rng();
        let mut fw =
            DpFw::new(data.clone(), plan.clone(), 2, x.clone(), BatchMode::Sampled).unwrap();
        assert!(matches!(fw.apply_downlink(1), Err(Error::Protocol(_))));
        fw.next_leaf(&mut r).unwrap().unwrap();
        assert!(matches!(fw.next_leaf(&mut r), Err(Error::Protocol(_))));
        fw.apply_downlink(1).unwrap();
        assert!(DpFw::new(data, plan, 2, x, BatchMode::Sampled)
            .unwrap()
            .finish()
            .is_err());
    }

    #[test]
    fn first_leaf_takes_full_step() {
        let data = vec![linear(&[0.9, 0.1])];
        let plan = Arc::new(plan_trees(1).unwrap());
        let x = SimplexPoint::vertex(1, 2).unwrap();
        let mut fw = DpFw::new(data, plan, 1, x, BatchMode::Sampled).unwrap();
        let mut r = rng();
        let leaf = fw.next_leaf(&mut r).unwrap().unwrap();
        assert_eq!(leaf.k, 1);
        fw.apply_downlink(2).unwrap();
        assert_eq!(fw.iterate().weights(), &[0.0, 1.0]);
    }

    #[test]
    fn step_sizes() {
        assert_eq!(step_size(1), 1.0);
        assert_eq!(step_size(3), 0.5);
    }

    #[test]
    fn linear_estimates_stay_in_unit_box() {
        let mut r = rng();
        let data: Vec<LossRef> = (0..32)
            .map(|i| linear(&[(i as f64 * 0.37) % 1.0, (i as f64 * 0.61) % 1.0, 0.5]))
            .collect();
        let plan = Arc::new(plan_trees(3).unwrap());
        let fw = DpFw::new(
            data,
            plan,
            16,
            SimplexPoint::uniform(3).unwrap(),
            BatchMode::Sampled,
        )
        .unwrap()
        .with_recording();
        let (x, visits) = fw.drive(&mut r, |leaf| Ok(argmin(&leaf.v))).unwrap();
        assert_eq!(x.dim(), 3);
        for v in &visits {
            // Linear losses: corrections cancel, so v is the root's batch mean.
            assert!(
                v.v.iter().all(|c| (-1e-12..=1.0 + 1e-12).contains(c)),
                "{:?}",
                v.v
            );
            let expect = if v.kind == VertexKind::Left {
                None
            } else {
                Some((16 >> v.address.depth()).max(1))
            };
            if let Some(n) = expect {
                assert_eq!(v.batch_len, n);
            }
        }
    }
}
