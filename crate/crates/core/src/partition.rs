//! Finest independent partition of the constraints.
//!
//! Two constraints belong to the same component when they are connected in
//! the constraint/variable bipartite graph. Components are found by label
//! propagation: every constraint starts with its own index as label, and
//! labels are pushed constraint → variable → constraint taking the minimum
//! until a full sweep changes nothing. Labels only decrease and are bounded
//! below, so the sweep terminates after at most (diameter + 1) passes.

use crate::system::SparseConstraintSystem;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintPartition {
    /// Component id of every constraint. Ids are dense and ordered by the
    /// smallest constraint index in each component.
    pub labels: Vec<usize>,
    /// Constraint indices of each component, ascending.
    pub components: Vec<Vec<usize>>,
    /// Component id of every variable; `None` for variables no constraint touches.
    pub variable_components: Vec<Option<usize>>,
}

impl ConstraintPartition {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Variables of each component, ascending.
    pub fn component_variables(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.components.len()];
        for (j, c) in self.variable_components.iter().enumerate() {
            if let Some(c) = c {
                out[*c].push(j);
            }
        }
        out
    }

    /// A single component holding every constraint (what a solver without
    /// partition awareness sees).
    pub fn trivial(system: &SparseConstraintSystem) -> Self {
        let m = system.m();
        let labels = vec![0; m];
        let components = if m == 0 { vec![] } else { vec![(0..m).collect()] };
        let variable_components = system
            .var_degrees()
            .iter()
            .map(|&l| (l > 0).then_some(0))
            .collect();
        Self {
            labels,
            components,
            variable_components,
        }
    }

    pub(crate) fn matches(&self, system: &SparseConstraintSystem) -> bool {
        self.labels.len() == system.m() && self.variable_components.len() == system.n()
    }
}

/// Raw label propagation. On return every constraint carries the smallest
/// constraint index of its connected component.
pub fn propagate_labels(system: &SparseConstraintSystem) -> Vec<usize> {
    let rows = system.entry_rows();
    let cols = system.entry_cols();
    let mut con = (0..system.m()).collect::<Vec<_>>();
    let mut var = vec![usize::MAX; system.n()];
    loop {
        let mut changed = false;
        for (&i, &j) in rows.iter().zip(cols) {
            if con[i] < var[j] {
                var[j] = con[i];
                changed = true;
            }
        }
        for (&i, &j) in rows.iter().zip(cols) {
            if var[j] < con[i] {
                con[i] = var[j];
                changed = true;
            }
        }
        if !changed {
            return con;
        }
    }
}

pub fn partition(system: &SparseConstraintSystem) -> ConstraintPartition {
    let raw = propagate_labels(system);
    let mut id_of_root = vec![usize::MAX; system.m()];
    let mut components: Vec<Vec<usize>> = Vec::new();
    let mut labels = Vec::with_capacity(system.m());
    for (i, &root) in raw.iter().enumerate() {
        if id_of_root[root] == usize::MAX {
            id_of_root[root] = components.len();
            components.push(Vec::new());
        }
        let id = id_of_root[root];
        components[id].push(i);
        labels.push(id);
    }
    let mut variable_components = vec![None; system.n()];
    for (&i, &j) in system.entry_rows().iter().zip(system.entry_cols()) {
        variable_components[j] = Some(labels[i]);
    }
    ConstraintPartition {
        labels,
        components,
        variable_components,
    }
}
