//! Cubic Hermite interpolation on a uniform grid, with exact piecewise
//! integrals. Slopes use 4th-order central differences in the interior and
//! 3rd-order one-sided stencils at the ends.

#[derive(Debug, Clone)]
pub struct UniformSpline {
    x0: f64,
    h: f64,
    y: Vec<f64>,
    m: Vec<f64>,
    /// cum[i] = integral from x0 to x0 + i*h.
    cum: Vec<f64>,
}

impl UniformSpline {
    pub fn new(x0: f64, h: f64, y: Vec<f64>) -> Self {
        let n = y.len();
        assert!(n >= 5, "uniform spline needs at least 5 points");
        let mut m = vec![0.0; n];
        for i in 2..n - 2 {
            m[i] = (y[i - 2] - 8.0 * y[i - 1] + 8.0 * y[i + 1] - y[i + 2]) / (12.0 * h);
        }
        let fwd = |a: f64, b: f64, c: f64, d: f64| (-11.0 * a + 18.0 * b - 9.0 * c + 2.0 * d) / (6.0 * h);
        m[0] = fwd(y[0], y[1], y[2], y[3]);
        m[1] = (-2.0 * y[0] - 3.0 * y[1] + 6.0 * y[2] - y[3]) / (6.0 * h);
        m[n - 1] = -fwd(y[n - 1], y[n - 2], y[n - 3], y[n - 4]);
        m[n - 2] = -(-2.0 * y[n - 1] - 3.0 * y[n - 2] + 6.0 * y[n - 3] - y[n - 4]) / (6.0 * h);
        // Exact integral of the Hermite cubic over each cell.
        let mut cum = vec![0.0; n];
        for i in 0..n - 1 {
            let cell = h * (0.5 * (y[i] + y[i + 1]) + h * (m[i] - m[i + 1]) / 12.0);
            cum[i + 1] = cum[i] + cell;
        }
        Self { x0, h, y, m, cum }
    }

    #[inline]
    fn locate(&self, x: f64) -> (usize, f64) {
        let n = self.y.len();
        let s = (x - self.x0) / self.h;
        let i = (s.floor() as isize).clamp(0, n as isize - 2) as usize;
        (i, s - i as f64)
    }

    pub fn x_min(&self) -> f64 {
        self.x0
    }

    pub fn x_max(&self) -> f64 {
        self.x0 + self.h * (self.y.len() - 1) as f64
    }

    /// Evaluate at `x`; clamps outside the grid to the boundary cells.
    pub fn eval(&self, x: f64) -> f64 {
        let (i, u) = self.locate(x);
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let (m0, m1) = (self.m[i] * self.h, self.m[i + 1] * self.h);
        let u2 = u * u;
        let u3 = u2 * u;
        y0 * (2.0 * u3 - 3.0 * u2 + 1.0)
            + m0 * (u3 - 2.0 * u2 + u)
            + y1 * (-2.0 * u3 + 3.0 * u2)
            + m1 * (u3 - u2)
    }

    /// First derivative at `x`.
    pub fn deriv(&self, x: f64) -> f64 {
        let (i, u) = self.locate(x);
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let (m0, m1) = (self.m[i] * self.h, self.m[i + 1] * self.h);
        let u2 = u * u;
        (y0 * (6.0 * u2 - 6.0 * u)
            + m0 * (3.0 * u2 - 4.0 * u + 1.0)
            + y1 * (-6.0 * u2 + 6.0 * u)
            + m1 * (3.0 * u2 - 2.0 * u))
            / self.h
    }

    /// Integral from the left grid edge to `x` (exact on the interpolant).
    pub fn integral_from_start(&self, x: f64) -> f64 {
        let (i, u) = self.locate(x);
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let (m0, m1) = (self.m[i] * self.h, self.m[i + 1] * self.h);
        let u2 = u * u;
        let u3 = u2 * u;
        let u4 = u2 * u2;
        let part = y0 * (0.5 * u4 - u3 + u)
            + m0 * (0.25 * u4 - 2.0 * u3 / 3.0 + 0.5 * u2)
            + y1 * (-0.5 * u4 + u3)
            + m1 * (0.25 * u4 - u3 / 3.0);
        self.cum[i] + self.h * part
    }

    /// Definite integral over `[a, b]` (exact on the interpolant).
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.integral_from_start(b) - self.integral_from_start(a)
    }
}
