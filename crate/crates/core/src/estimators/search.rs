//! Exhaustive maximum-likelihood shift search, plain and on coset subgrids.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::covariance::HermitianCov;
use crate::error::{Error, Result};

/// Ascending candidate shifts.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftGrid {
    shifts: Vec<f64>,
}

impl ShiftGrid {
    pub fn new(mut shifts: Vec<f64>) -> Result<Self> {
        if shifts.is_empty() {
            return Err(Error::Empty("shift grid"));
        }
        if shifts.iter().any(|d| !d.is_finite()) {
            return Err(Error::InvalidParameter("non-finite shift".into()));
        }
        shifts.sort_by(f64::total_cmp);
        shifts.dedup();
        Ok(Self { shifts })
    }

    /// Integer shifts `-max..=max`.
    pub fn symmetric(max: i64) -> Self {
        Self {
            shifts: (-max..=max).map(|d| d as f64).collect(),
        }
    }

    pub fn shifts(&self) -> &[f64] {
        &self.shifts
    }

    pub fn len(&self) -> usize {
        self.shifts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shifts.is_empty()
    }
}

/// Index of the smallest cost; ties go to the smallest `|shift|`, then to
/// the smaller shift.
pub(crate) fn argmin_cost(costs: &[f64], shifts: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..costs.len() {
        let better = costs[i] < costs[best]
            || (costs[i] == costs[best] && shifts[i].abs() < shifts[best].abs());
        if better {
            best = i;
        }
    }
    best
}

/// `argmin_delta <C(delta)^{-1} v, v>` over the grid, with the cost profile.
pub fn ml_shift_search<F>(slice: &[Complex64], cov_at: F, grid: &ShiftGrid) -> Result<(f64, Vec<f64>)>
where
    F: Fn(f64) -> Result<HermitianCov>,
{
    let profile = grid
        .shifts()
        .iter()
        .map(|&d| cov_at(d)?.quadratic_form(slice))
        .collect::<Result<Vec<f64>>>()?;
    let best = argmin_cost(&profile, grid.shifts());
    Ok((grid.shifts()[best], profile))
}

/// Geometry of a subgrid search over the rows of a finely sampled
/// transform.
///
/// The observed slice is restricted to the window `[start, start + len)`
/// and split into `stride` cosets. Candidate shift `d` (in fine rows) pairs
/// observed row `r` with reference row `r + direction * d`; each candidate
/// uses the single coset whose reference rows fall on the lattice of
/// multiples of `stride`, where the reference covariance is known.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgridLayout {
    /// Number of fine rows of the transforms.
    pub rows: usize,
    /// Rows wrap around (frequency channels of a Gabor transform).
    pub periodic: bool,
    pub start: usize,
    pub len: usize,
    pub stride: usize,
    /// `+1` when observed row `m` corresponds to reference row `m + d`.
    pub direction: i64,
    pub shifts: Vec<i64>,
}

impl SubgridLayout {
    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 || self.len == 0 || self.len % self.stride != 0 {
            return Err(Error::InvalidParameter(format!(
                "window length {} must be a positive multiple of the stride {}",
                self.len, self.stride
            )));
        }
        if self.shifts.is_empty() {
            return Err(Error::Empty("shift grid"));
        }
        if self.periodic {
            if self.rows % self.stride != 0 {
                return Err(Error::NotDivisor {
                    name: "stride",
                    value: self.stride,
                    len: self.rows,
                });
            }
        } else {
            for &d in &self.shifts {
                let lo = self.start as i64 + self.direction * d;
                let hi = lo + self.len as i64 - 1;
                if lo < 0 || hi >= self.rows as i64 {
                    return Err(Error::InvalidParameter(format!(
                        "shift {d} moves the window outside the {} computed rows",
                        self.rows
                    )));
                }
            }
        }
        if self.start >= self.rows || (!self.periodic && self.start + self.len > self.rows) || self.len > self.rows {
            return Err(Error::InvalidParameter("observation window exceeds the rows".into()));
        }
        Ok(())
    }

    /// Rows of coset `offset` of the observation window, wrapped when
    /// periodic.
    pub fn coset_rows(&self, offset: usize) -> Vec<usize> {
        (self.start + offset..self.start + self.len)
            .step_by(self.stride)
            .map(|r| if self.periodic { r % self.rows } else { r })
            .collect()
    }

    /// Coset used by candidate shift `d`.
    pub fn coset_of(&self, d: i64) -> usize {
        (-(self.start as i64) - self.direction * d).rem_euclid(self.stride as i64) as usize
    }

    /// Number of lattice rows (multiples of the stride) among the fine rows.
    pub fn lattice_len(&self) -> usize {
        self.rows.div_ceil(self.stride)
    }

    /// Lattice indices of the reference rows of candidate `d`.
    pub fn reference_lattice(&self, d: i64) -> Vec<usize> {
        let offset = self.coset_of(d);
        self.coset_rows(offset)
            .into_iter()
            .map(|r| {
                let mut u = r as i64 + self.direction * d;
                if self.periodic {
                    u = u.rem_euclid(self.rows as i64);
                }
                debug_assert_eq!(u % self.stride as i64, 0);
                (u / self.stride as i64) as usize
            })
            .collect()
    }
}

/// Outcome of the subgrid search on one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubgridChoice {
    pub delta: i64,
    pub offset: usize,
    pub cost: f64,
}

/// Runs the per-coset searches for every column of `observed` (rows are the
/// fine rows, columns are frames) against the lattice covariance
/// `reference`, returning each frame's winning shift.
///
/// Every candidate's covariance is a principal submatrix of `reference`,
/// factored once and shared across frames. Within a coset ties go to the
/// smallest `|d|`; across cosets to the lowest offset.
pub fn subgrid_search(
    layout: &SubgridLayout,
    observed: &DMatrix<Complex64>,
    reference: &HermitianCov,
) -> Result<(Vec<SubgridChoice>, usize)> {
    layout.validate()?;
    if observed.nrows() != layout.rows {
        return Err(Error::LengthMismatch {
            expected: layout.rows,
            found: observed.nrows(),
        });
    }
    if reference.dim() != layout.lattice_len() {
        return Err(Error::LengthMismatch {
            expected: layout.lattice_len(),
            found: reference.dim(),
        });
    }
    let frames = observed.ncols();
    let cosets: Vec<DMatrix<Complex64>> = (0..layout.stride)
        .map(|i| {
            let rows = layout.coset_rows(i);
            DMatrix::from_fn(rows.len(), frames, |r, n| observed[(rows[r], n)])
        })
        .collect();
    let per_shift: Vec<(Vec<f64>, f64)> = layout
        .shifts
        .par_iter()
        .map(|&d| {
            let idx = layout.reference_lattice(d);
            let sub = DMatrix::from_fn(idx.len(), idx.len(), |i, j| reference.matrix()[(idx[i], idx[j])]);
            let cov = HermitianCov::new(sub)?;
            let costs = cov.quadratic_forms(&cosets[layout.coset_of(d)])?;
            Ok((costs, cov.ridge().unwrap_or(0.0)))
        })
        .collect::<Result<Vec<_>>>()?;
    let ridged = per_shift.iter().filter(|(_, r)| *r > 0.0).count();
    let shifts: Vec<f64> = layout.shifts.iter().map(|&d| d as f64).collect();
    let choices = (0..frames)
        .map(|n| {
            let costs: Vec<f64> = per_shift.iter().map(|(c, _)| c[n]).collect();
            pick_subgrid(layout, &costs, &shifts)
        })
        .collect();
    Ok((choices, ridged))
}

fn pick_subgrid(layout: &SubgridLayout, costs: &[f64], shifts: &[f64]) -> SubgridChoice {
    let mut best: Option<SubgridChoice> = None;
    for offset in 0..layout.stride {
        let members: Vec<usize> = (0..shifts.len())
            .filter(|&i| layout.coset_of(layout.shifts[i]) == offset)
            .collect();
        if members.is_empty() {
            continue;
        }
        let local_costs: Vec<f64> = members.iter().map(|&i| costs[i]).collect();
        let local_shifts: Vec<f64> = members.iter().map(|&i| shifts[i]).collect();
        let k = members[argmin_cost(&local_costs, &local_shifts)];
        let candidate = SubgridChoice {
            delta: layout.shifts[k],
            offset,
            cost: costs[k],
        };
        if best.is_none_or(|b| candidate.cost < b.cost) {
            best = Some(candidate);
        }
    }
    best.expect("validated layouts have at least one candidate")
}

/// Subgrid search on a single fine column with an explicit family of
/// candidate covariances. With `stride = 1` this is [`ml_shift_search`].
pub fn subgrid_refine<F>(
    column: &[Complex64],
    layout: &SubgridLayout,
    cov_at: F,
) -> Result<SubgridChoice>
where
    F: Fn(i64) -> Result<HermitianCov>,
{
    layout.validate()?;
    if column.len() != layout.rows {
        return Err(Error::LengthMismatch {
            expected: layout.rows,
            found: column.len(),
        });
    }
    let costs = layout
        .shifts
        .iter()
        .map(|&d| {
            let rows = layout.coset_rows(layout.coset_of(d));
            let v: Vec<Complex64> = rows.iter().map(|&r| column[r]).collect();
            cov_at(d)?.quadratic_form(&v)
        })
        .collect::<Result<Vec<f64>>>()?;
    let shifts: Vec<f64> = layout.shifts.iter().map(|&d| d as f64).collect();
    Ok(pick_subgrid(layout, &costs, &shifts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_candidate() {
        let grid = ShiftGrid::new(vec![3.5]).unwrap();
        let (d, profile) =
            ml_shift_search(&[Complex64::new(1.0, 0.0)], |_| Ok(HermitianCov::identity(1)), &grid).unwrap();
        assert_eq!(d, 3.5);
        assert_eq!(profile.len(), 1);
    }

    #[test]
    fn tie_goes_to_smallest_magnitude() {
        let shifts = [-2.0, -1.0, 1.0, 2.0];
        assert_eq!(argmin_cost(&[1.0, 1.0, 1.0, 1.0], &shifts), 1);
        assert_eq!(argmin_cost(&[1.0, 2.0, 2.0, 0.5], &shifts), 3);
    }

    #[test]
    fn layout_cosets_land_on_lattice() {
        let layout = SubgridLayout {
            rows: 40,
            periodic: false,
            start: 10,
            len: 20,
            stride: 4,
            direction: 1,
            shifts: (-10..=10).collect(),
        };
        layout.validate().unwrap();
        for &d in &layout.shifts {
            let rows = layout.coset_rows(layout.coset_of(d));
            assert_eq!(rows.len(), 5);
            for (r, u) in rows.iter().zip(layout.reference_lattice(d)) {
                assert_eq!((*r as i64 + d) as usize, 4 * u);
            }
        }
        let periodic = SubgridLayout {
            rows: 32,
            periodic: true,
            start: 28,
            len: 8,
            stride: 4,
            direction: -1,
            shifts: (-6..=6).collect(),
        };
        periodic.validate().unwrap();
        for &d in &periodic.shifts {
            for (r, u) in periodic
                .coset_rows(periodic.coset_of(d))
                .iter()
                .zip(periodic.reference_lattice(d))
            {
                assert_eq!((*r as i64 - d).rem_euclid(32) as usize, 4 * u);
            }
        }
    }

    #[test]
    fn identical_cosets_tie_to_offset_zero() {
        let layout = SubgridLayout {
            rows: 8,
            periodic: true,
            start: 0,
            len: 8,
            stride: 2,
            direction: 1,
            shifts: vec![0, 1],
        };
        let column = vec![Complex64::new(1.0, 0.0); 8];
        let choice = subgrid_refine(&column, &layout, |_| Ok(HermitianCov::identity(4))).unwrap();
        assert_eq!(choice.offset, 0);
        assert_eq!(choice.delta, 0);
    }
}
