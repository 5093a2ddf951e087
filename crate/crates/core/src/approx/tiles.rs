use crate::env::{ContinuousState, POSITION_BOUNDS, VELOCITY_BOUNDS};
use crate::mdp::ActionId;

/// Active feature indices for one (state, action); each has value 1.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SparseFeatures {
    indices: Vec<usize>,
}

impl SparseFeatures {
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Grid tile coding over a 2-D box with one feature block per action.
///
/// Each dimension is divided into `tiles_per_dim` tile widths. Tiling `i` is
/// displaced by `i * (2d + 1) / num_tilings` of a tile width along dimension
/// `d` (modulo one width), so each tiling holds `tiles_per_dim + 1` cells per
/// dimension to cover the shifted box.
#[derive(Debug, Clone, PartialEq)]
pub struct TileCoder {
    num_tilings: usize,
    tiles_per_dim: [usize; 2],
    low: [f64; 2],
    high: [f64; 2],
    num_actions: usize,
    offsets: Vec<[f64; 2]>,
    cells_per_tiling: usize,
}

impl TileCoder {
    pub fn new(
        num_tilings: usize,
        tiles_per_dim: [usize; 2],
        low: [f64; 2],
        high: [f64; 2],
        num_actions: usize,
    ) -> Self {
        assert!(num_tilings >= 1 && num_actions >= 1);
        assert!(tiles_per_dim.iter().all(|&t| t >= 1));
        assert!(low[0] < high[0] && low[1] < high[1]);
        let offsets = (0..num_tilings)
            .map(|i| {
                let shift = |d: usize| ((i * (2 * d + 1)) % num_tilings) as f64 / num_tilings as f64;
                [shift(0), shift(1)]
            })
            .collect();
        Self {
            num_tilings,
            tiles_per_dim,
            low,
            high,
            num_actions,
            offsets,
            cells_per_tiling: (tiles_per_dim[0] + 1) * (tiles_per_dim[1] + 1),
        }
    }

    /// 8 tilings of 8 x 8 tiles over position x velocity, 3 actions.
    pub fn mountain_car() -> Self {
        Self::new(
            8,
            [8, 8],
            [POSITION_BOUNDS.0, VELOCITY_BOUNDS.0],
            [POSITION_BOUNDS.1, VELOCITY_BOUNDS.1],
            3,
        )
    }

    pub fn num_tilings(&self) -> usize {
        self.num_tilings
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_features(&self) -> usize {
        self.num_tilings * self.cells_per_tiling * self.num_actions
    }

    /// Tile width along each dimension.
    pub fn tile_width(&self) -> [f64; 2] {
        [
            (self.high[0] - self.low[0]) / self.tiles_per_dim[0] as f64,
            (self.high[1] - self.low[1]) / self.tiles_per_dim[1] as f64,
        ]
    }

    /// Writes the per-tiling cell indices of `x` (action block 0) into `out`.
    /// States outside the box are clamped onto it.
    pub fn base_indices(&self, x: [f64; 2], out: &mut Vec<usize>) {
        out.clear();
        let w = self.tile_width();
        let scaled = [
            (x[0].clamp(self.low[0], self.high[0]) - self.low[0]) / w[0],
            (x[1].clamp(self.low[1], self.high[1]) - self.low[1]) / w[1],
        ];
        let cols = self.tiles_per_dim[1] + 1;
        for (i, off) in self.offsets.iter().enumerate() {
            let r = (scaled[0] + off[0]).floor() as usize;
            let c = (scaled[1] + off[1]).floor() as usize;
            out.push(i * self.cells_per_tiling + r * cols + c);
        }
    }

    /// Shifts base indices into the block of action `a`.
    pub fn with_action(&self, base: &[usize], a: ActionId, out: &mut SparseFeatures) {
        assert!(a.0 < self.num_actions);
        let shift = a.0 * self.num_tilings * self.cells_per_tiling;
        out.indices.clear();
        out.indices.extend(base.iter().map(|&i| i + shift));
    }

    pub fn features(&self, s: ContinuousState, a: ActionId) -> SparseFeatures {
        let mut base = Vec::with_capacity(self.num_tilings);
        self.base_indices(s.as_array(), &mut base);
        let mut out = SparseFeatures::default();
        self.with_action(&base, a, &mut out);
        out
    }
}
