use std::fmt;

/// Resources (rows).
pub const ROWS: usize = 3;
/// Items (columns).
pub const COLS: usize = 4;
pub const ENTRIES: usize = ROWS * COLS;

/// A 3×4 item-weight matrix: entry `(i, j)` is how much of resource `i` one
/// unit of item `j` consumes.
///
/// The flat 12-vector form is row-major: elements `0..4` are row 0.
#[derive(Clone, Copy, PartialEq)]
pub struct WeightMatrix(pub [[f64; COLS]; ROWS]);

impl WeightMatrix {
    pub fn filled(value: f64) -> Self {
        WeightMatrix([[value; COLS]; ROWS])
    }

    pub fn from_flat(flat: &[f64; ENTRIES]) -> Self {
        let mut m = [[0.0; COLS]; ROWS];
        for (k, &v) in flat.iter().enumerate() {
            m[k / COLS][k % COLS] = v;
        }
        WeightMatrix(m)
    }

    pub fn to_flat(&self) -> [f64; ENTRIES] {
        let mut flat = [0.0; ENTRIES];
        for (k, v) in flat.iter_mut().enumerate() {
            *v = self.0[k / COLS][k % COLS];
        }
        flat
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[row][col]
    }

    pub fn row(&self, row: usize) -> &[f64; COLS] {
        &self.0[row]
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().flat_map(|r| r.iter().copied())
    }

    pub fn min_entry(&self) -> f64 {
        self.iter().fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(f64::is_finite)
    }

    /// Entrywise map.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = *self;
        for row in out.0.iter_mut() {
            for v in row.iter_mut() {
                *v = f(*v);
            }
        }
        out
    }

    pub fn scaled(&self, factor: f64) -> Self {
        self.map(|v| v * factor)
    }
}

impl fmt::Debug for WeightMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}
