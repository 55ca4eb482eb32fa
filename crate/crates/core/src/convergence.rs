//! Refinement studies on final interface positions.

use crate::driver::{SimState, SimulationConfig};
use crate::geometry::{hausdorff_segments, Segment};

/// Which discretization parameter a study refines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Refined {
    TimeStep,
    GridSize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementStudy {
    pub refined: Refined,
    /// Parameter values from coarsest to finest.
    pub values: Vec<f64>,
    /// Hausdorff distance between successive final interfaces.
    pub distances: Vec<f64>,
    /// `log(d_k / d_{k+1}) / log(r_k)` with `r_k` the refinement ratio.
    pub orders: Vec<f64>,
}

impl RefinementStudy {
    pub fn from_interfaces(refined: Refined, values: Vec<f64>, interfaces: &[Vec<Segment>]) -> Self {
        assert_eq!(values.len(), interfaces.len());
        let distances: Vec<f64> = interfaces
            .windows(2)
            .map(|w| hausdorff_segments(&w[0], &w[1]))
            .collect();
        let orders = (0..distances.len().saturating_sub(1))
            .map(|k| (distances[k] / distances[k + 1]).ln() / (values[k + 1] / values[k + 2]).ln())
            .collect();
        RefinementStudy {
            refined,
            values,
            distances,
            orders,
        }
    }

    pub fn monotone(&self) -> bool {
        self.distances.windows(2).all(|w| w[1] < w[0])
    }

    pub fn min_order(&self) -> Option<f64> {
        self.orders.iter().copied().reduce(f64::min)
    }
}

/// Final interface translated to world coordinates.
pub fn world_interface(state: &SimState) -> Vec<Segment> {
    let [ox, oy] = state.offset;
    state
        .phi
        .geometry()
        .segments
        .into_iter()
        .map(|s| Segment {
            cell: s.cell,
            a: [s.a[0] + ox, s.a[1] + oy],
            b: [s.b[0] + ox, s.b[1] + oy],
        })
        .collect()
}

/// Split cases into a time-step study (cases sharing the first case's `h`)
/// and a grid study (cases sharing the smallest `dt`). Returns indices
/// ordered from coarse to fine.
pub fn plan(cases: &[SimulationConfig]) -> (Vec<usize>, Vec<usize>) {
    let Some(first) = cases.first() else {
        return (Vec::new(), Vec::new());
    };
    let mut by_dt: Vec<usize> = (0..cases.len()).filter(|&k| cases[k].h == first.h).collect();
    by_dt.sort_by(|&a, &b| cases[b].dt.total_cmp(&cases[a].dt));
    let dt_min = cases.iter().map(|c| c.dt).fold(f64::INFINITY, f64::min);
    let mut by_h: Vec<usize> = (0..cases.len()).filter(|&k| cases[k].dt == dt_min).collect();
    by_h.sort_by(|&a, &b| cases[b].h.total_cmp(&cases[a].h));
    (by_dt, by_h)
}

/// Both studies from the final states of `cases`.
pub fn studies(cases: &[SimulationConfig], finals: &[SimState]) -> Vec<RefinementStudy> {
    let interfaces: Vec<Vec<Segment>> = finals.iter().map(world_interface).collect();
    let (by_dt, by_h) = plan(cases);
    let pick = |idx: &[usize]| idx.iter().map(|&k| interfaces[k].clone()).collect::<Vec<_>>();
    vec![
        RefinementStudy::from_interfaces(Refined::TimeStep, by_dt.iter().map(|&k| cases[k].dt).collect(), &pick(&by_dt)),
        RefinementStudy::from_interfaces(Refined::GridSize, by_h.iter().map(|&k| cases[k].h).collect(), &pick(&by_h)),
    ]
}
