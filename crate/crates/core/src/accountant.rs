//! Rényi DP accounting over a fixed grid of orders.
//!
//! Costs are kept as [`RdpCurve`]s (one ε per order, in nats). Curves compose
//! by pointwise addition and convert to (ε, δ)-DP with
//! `ε(λ) + ln(1/δ)/(λ−1)`, minimised over the grid. [`BudgetLedger`] holds the
//! running total for one labelling session and refuses work pre-commit.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing list of Rényi orders, all greater than one.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct OrderGrid {
    orders: Arc<[f64]>,
}

impl OrderGrid {
    pub fn new(orders: Vec<f64>) -> Result<Self> {
        if orders.is_empty() {
            return Err(Error::param("order grid is empty"));
        }
        for w in orders.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::param(format!("orders must be strictly increasing ({} then {})", w[0], w[1])));
            }
        }
        if let Some(bad) = orders.iter().find(|&&o| !(o > 1.0) || !o.is_finite()) {
            return Err(Error::param(format!("order {bad} is not a finite value > 1")));
        }
        Ok(OrderGrid { orders: orders.into() })
    }

    pub fn orders(&self) -> &[f64] {
        &self.orders
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn max_order(&self) -> f64 {
        self.orders[self.orders.len() - 1]
    }

    /// Parses a comma separated list such as `1.5,2,4,8`.
    pub fn parse_list(s: &str) -> Result<Self> {
        let orders = s
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| Error::param(format!("bad order {t:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        OrderGrid::new(orders)
    }
}

impl Default for OrderGrid {
    /// 1.25, 1.5 and the integers 2..=64.
    fn default() -> Self {
        let mut orders = vec![1.25, 1.5];
        orders.extend((2..=64).map(f64::from));
        OrderGrid { orders: orders.into() }
    }
}

impl fmt::Debug for OrderGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.orders.iter()).finish()
    }
}

impl TryFrom<Vec<f64>> for OrderGrid {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        OrderGrid::new(v)
    }
}

impl From<OrderGrid> for Vec<f64> {
    fn from(g: OrderGrid) -> Self {
        g.orders.to_vec()
    }
}

/// RDP ε as a function of the order, sampled on an [`OrderGrid`].
///
/// Entries are non-negative; `+∞` marks a release with no finite guarantee
/// (the zero-noise oracle mode).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RdpCurve {
    #[serde(rename = "orders")]
    grid: OrderGrid,
    eps: Vec<f64>,
}

impl RdpCurve {
    pub fn zero(grid: &OrderGrid) -> Self {
        RdpCurve { grid: grid.clone(), eps: vec![0.0; grid.len()] }
    }

    pub fn infinite(grid: &OrderGrid) -> Self {
        RdpCurve { grid: grid.clone(), eps: vec![f64::INFINITY; grid.len()] }
    }

    pub fn from_values(grid: &OrderGrid, eps: Vec<f64>) -> Result<Self> {
        if eps.len() != grid.len() {
            return Err(Error::param(format!("curve has {} values for {} orders", eps.len(), grid.len())));
        }
        if let Some(bad) = eps.iter().find(|e| !(**e >= 0.0)) {
            return Err(Error::param(format!("RDP value {bad} is negative or NaN")));
        }
        Ok(RdpCurve { grid: grid.clone(), eps })
    }

    pub fn from_fn(grid: &OrderGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let eps = grid.orders().iter().map(|&o| f(o)).collect();
        RdpCurve::from_values(grid, eps)
    }

    pub fn grid(&self) -> &OrderGrid {
        &self.grid
    }

    pub fn eps(&self) -> &[f64] {
        &self.eps
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid.orders().iter().copied().zip(self.eps.iter().copied())
    }

    /// ε at `order`, if that order is on the grid.
    pub fn at(&self, order: f64) -> Option<f64> {
        self.grid.orders().iter().position(|&o| o == order).map(|i| self.eps[i])
    }

    pub fn is_finite(&self) -> bool {
        self.eps.iter().all(|e| e.is_finite())
    }

    fn check_grid(&self, other: &RdpCurve) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &RdpCurve) -> Result<RdpCurve> {
        self.check_grid(other)?;
        let eps = self.eps.iter().zip(&other.eps).map(|(a, b)| a + b).collect();
        Ok(RdpCurve { grid: self.grid.clone(), eps })
    }

    /// Pointwise minimum; the minimum of two valid bounds for one mechanism
    /// is itself a valid bound at every order.
    pub fn pointwise_min(&self, other: &RdpCurve) -> Result<RdpCurve> {
        self.check_grid(other)?;
        let eps = self.eps.iter().zip(&other.eps).map(|(a, b)| a.min(*b)).collect();
        Ok(RdpCurve { grid: self.grid.clone(), eps })
    }

    pub fn scaled(&self, factor: f64) -> Result<RdpCurve> {
        if !(factor >= 0.0) {
            return Err(Error::param(format!("scale factor {factor} must be >= 0")));
        }
        let eps = self.eps.iter().map(|e| e * factor).collect();
        Ok(RdpCurve { grid: self.grid.clone(), eps })
    }
}

/// An (ε, δ)-DP statement together with the order that produced it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpGuarantee {
    pub epsilon: f64,
    pub delta: f64,
    pub achieving_order: f64,
}

/// Target (ε, δ) for a labelling session.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        let b = PrivacyBudget { epsilon, delta };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::param(format!("budget epsilon {} must be finite and >= 0", self.epsilon)));
        }
        check_delta(self.delta)
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param(format!("delta {delta} must lie in (0, 1)")));
    }
    Ok(())
}

/// RDP curve of the Gaussian mechanism: `ε(λ) = λ·Δ₂²/(2σ²)`.
///
/// Holds for vector-valued queries with isotropic noise as well, with Δ₂ the
/// ℓ2 sensitivity of the whole vector.
pub fn gaussian_rdp(delta2: f64, sigma: f64, grid: &OrderGrid) -> Result<RdpCurve> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::param(format!("noise std {sigma} must be > 0")));
    }
    if !(delta2 >= 0.0) || !delta2.is_finite() {
        return Err(Error::param(format!("sensitivity {delta2} must be >= 0")));
    }
    let c = delta2 * delta2 / (2.0 * sigma * sigma);
    RdpCurve::from_fn(grid, |order| order * c)
}

/// Adaptive sequential composition: pointwise sum, with pairwise summation
/// per order. The empty composition is the zero curve.
pub fn compose(grid: &OrderGrid, curves: &[RdpCurve]) -> Result<RdpCurve> {
    if curves.iter().any(|c| c.grid != *grid) {
        return Err(Error::GridMismatch);
    }
    let mut column = Vec::with_capacity(curves.len());
    let eps = (0..grid.len())
        .map(|i| {
            column.clear();
            column.extend(curves.iter().map(|c| c.eps[i]));
            pairwise_sum(&column)
        })
        .collect();
    Ok(RdpCurve { grid: grid.clone(), eps })
}

fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 8;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let (l, r) = xs.split_at(xs.len() / 2);
    pairwise_sum(l) + pairwise_sum(r)
}

/// Converts an RDP curve to (ε, δ)-DP, taking the best order on the grid.
/// Ties go to the smallest order.
pub fn to_dp(curve: &RdpCurve, delta: f64) -> Result<DpGuarantee> {
    check_delta(delta)?;
    let log_inv_delta = -delta.ln();
    let mut best = DpGuarantee { epsilon: f64::INFINITY, delta, achieving_order: curve.grid.orders()[0] };
    for (order, eps) in curve.iter() {
        let e = eps + log_inv_delta / (order - 1.0);
        if e < best.epsilon {
            best.epsilon = e;
            best.achieving_order = order;
        }
    }
    Ok(best)
}

/// Running privacy spend for one session, charged pre-commit.
///
/// Callers ask [`would_exceed`](Self::would_exceed) before releasing a
/// query; a refused query is neither answered nor charged.
#[derive(Clone, Debug)]
pub struct BudgetLedger {
    accumulated: RdpCurve,
    // Neumaier running sums and compensation terms, one per order.
    sum: Vec<f64>,
    compensation: Vec<f64>,
    budget: PrivacyBudget,
}

#[derive(Serialize, Deserialize)]
struct LedgerState {
    orders: Vec<f64>,
    eps: Vec<f64>,
    budget: PrivacyBudget,
}

impl BudgetLedger {
    pub fn new(grid: &OrderGrid, budget: PrivacyBudget) -> Result<Self> {
        budget.validate()?;
        Ok(BudgetLedger {
            accumulated: RdpCurve::zero(grid),
            sum: vec![0.0; grid.len()],
            compensation: vec![0.0; grid.len()],
            budget,
        })
    }

    pub fn grid(&self) -> &OrderGrid {
        &self.accumulated.grid
    }

    pub fn budget(&self) -> PrivacyBudget {
        self.budget
    }

    pub fn accumulated(&self) -> &RdpCurve {
        &self.accumulated
    }

    /// (ε, δ) spent so far, at the budget's δ.
    pub fn spent(&self) -> DpGuarantee {
        to_dp(&self.accumulated, self.budget.delta).expect("budget delta validated at construction")
    }

    pub fn exhausted(&self) -> bool {
        self.spent().epsilon > self.budget.epsilon
    }

    pub fn would_exceed(&self, cost: &RdpCurve) -> Result<bool> {
        let next = self.accumulated.checked_add(cost)?;
        Ok(to_dp(&next, self.budget.delta)?.epsilon > self.budget.epsilon)
    }

    /// Adds `cost` to the running total and reports whether the ledger is now
    /// exhausted.
    pub fn charge(&mut self, cost: &RdpCurve) -> Result<bool> {
        self.accumulated.check_grid(cost)?;
        for (i, &x) in cost.eps.iter().enumerate() {
            let (s, c) = (self.sum[i], self.compensation[i]);
            let t = s + x;
            if t.is_finite() {
                self.compensation[i] = if s.abs() >= x.abs() { c + ((s - t) + x) } else { c + ((x - t) + s) };
            } else {
                self.compensation[i] = 0.0;
            }
            self.sum[i] = t;
            let total = t + self.compensation[i];
            self.accumulated.eps[i] = total.max(self.accumulated.eps[i]);
        }
        Ok(self.exhausted())
    }

    pub fn to_json(&self) -> Result<String> {
        let state = LedgerState {
            orders: self.grid().orders().to_vec(),
            eps: self.accumulated.eps.clone(),
            budget: self.budget,
        };
        Ok(serde_json::to_string_pretty(&state)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let state: LedgerState = serde_json::from_str(s).map_err(|e| Error::CorruptLedger(e.to_string()))?;
        let grid = OrderGrid::new(state.orders).map_err(|e| Error::CorruptLedger(e.to_string()))?;
        let accumulated = RdpCurve::from_values(&grid, state.eps).map_err(|e| Error::CorruptLedger(e.to_string()))?;
        state.budget.validate().map_err(|e| Error::CorruptLedger(e.to_string()))?;
        Ok(BudgetLedger {
            sum: accumulated.eps.clone(),
            compensation: vec![0.0; grid.len()],
            accumulated,
            budget: state.budget,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(order: f64) -> OrderGrid {
        OrderGrid::new(vec![order]).unwrap()
    }

    #[test]
    fn grid_rejects_bad_orders() {
        assert!(OrderGrid::new(vec![]).is_err());
        assert!(OrderGrid::new(vec![1.0, 2.0]).is_err());
        assert!(OrderGrid::new(vec![3.0, 2.0]).is_err());
        assert!(OrderGrid::new(vec![2.0, 2.0]).is_err());
        assert!(OrderGrid::new(vec![f64::NAN]).is_err());
        assert!(OrderGrid::parse_list("1.5, 2,8").is_ok());
    }

    #[test]
    fn default_grid_layout() {
        let g = OrderGrid::default();
        assert_eq!(g.len(), 65);
        assert_eq!(&g.orders()[..3], &[1.25, 1.5, 2.0]);
        assert_eq!(g.max_order(), 64.0);
    }

    #[test]
    fn gaussian_unit_case() {
        let c = gaussian_rdp(1.0, 1.0, &single(2.0)).unwrap();
        assert_eq!(c.eps(), &[1.0]);
    }

    #[test]
    fn gaussian_zero_sensitivity() {
        let c = gaussian_rdp(0.0, 5.0, &OrderGrid::default()).unwrap();
        assert!(c.eps().iter().all(|&e| e == 0.0));
    }

    #[test]
    fn gaussian_tau_voting_cost() {
        // Δ₂ = √2·1.8, σ = 9, λ = 20 → 20·6.48/162 = 0.8
        let d = 2f64.sqrt() * 1.8;
        let c = gaussian_rdp(d, 9.0, &single(20.0)).unwrap();
        assert!((c.eps()[0] - 20.0 * 6.48 / 162.0).abs() < 1e-14);
        assert!((c.eps()[0] - 0.8).abs() < 1e-14);
    }

    #[test]
    fn gaussian_rejects_bad_sigma() {
        let g = OrderGrid::default();
        assert!(matches!(gaussian_rdp(1.0, 0.0, &g), Err(Error::InvalidParameter(_))));
        assert!(matches!(gaussian_rdp(1.0, -2.0, &g), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn compose_identities() {
        let g = OrderGrid::default();
        assert_eq!(compose(&g, &[]).unwrap(), RdpCurve::zero(&g));
        let c = gaussian_rdp(1.3, 2.0, &g).unwrap();
        assert_eq!(compose(&g, &[c.clone(), RdpCurve::zero(&g)]).unwrap(), c);

        let g1 = single(3.0);
        let parts: Vec<_> = [0.1, 0.2, 0.3].iter().map(|&e| RdpCurve::from_values(&g1, vec![e]).unwrap()).collect();
        assert!((compose(&g1, &parts).unwrap().eps()[0] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn compose_grid_mismatch() {
        let a = RdpCurve::zero(&single(2.0));
        let b = RdpCurve::zero(&single(3.0));
        assert!(matches!(compose(&single(2.0), &[a, b]), Err(Error::GridMismatch)));
    }

    #[test]
    fn to_dp_single_order() {
        let c = RdpCurve::from_values(&single(2.0), vec![1.0]).unwrap();
        let dp = to_dp(&c, (-1f64).exp()).unwrap();
        assert!((dp.epsilon - 2.0).abs() < 1e-15);
        assert_eq!(dp.achieving_order, 2.0);
    }

    #[test]
    fn to_dp_zero_curve_uses_largest_order() {
        let g = OrderGrid::default();
        let dp = to_dp(&RdpCurve::zero(&g), 1e-6).unwrap();
        assert_eq!(dp.achieving_order, 64.0);
        assert!((dp.epsilon - (1e6f64).ln() / 63.0).abs() < 1e-15);
    }

    #[test]
    fn to_dp_ties_prefer_smallest_order() {
        // ε(λ) + 1/(λ−1) with δ = e⁻¹: 1 + 1 at λ=2 and 1.5 + 0.5 at λ=3.
        let g = OrderGrid::new(vec![2.0, 3.0]).unwrap();
        let c = RdpCurve::from_values(&g, vec![1.0, 1.5]).unwrap();
        let dp = to_dp(&c, (-1f64).exp()).unwrap();
        assert_eq!(dp.achieving_order, 2.0);
    }

    #[test]
    fn to_dp_rejects_bad_delta() {
        let c = RdpCurve::zero(&single(2.0));
        for d in [0.0, 1.0, -0.5, 2.0, f64::NAN] {
            assert!(to_dp(&c, d).is_err());
        }
    }

    #[test]
    fn zero_charge_leaves_state() {
        let g = OrderGrid::default();
        let mut l = BudgetLedger::new(&g, PrivacyBudget::new(1.0, 1e-6).unwrap()).unwrap();
        let before = l.exhausted();
        assert_eq!(l.charge(&RdpCurve::zero(&g)).unwrap(), before);
        assert_eq!(l.accumulated(), &RdpCurve::zero(&g));
    }

    #[test]
    fn exhaustion_flips_once() {
        let g = OrderGrid::default();
        let mut l = BudgetLedger::new(&g, PrivacyBudget::new(5.0, 1e-5).unwrap()).unwrap();
        let cost = gaussian_rdp(2f64.sqrt(), 4.0, &g).unwrap();
        let flags: Vec<bool> = (0..200).map(|_| l.charge(&cost).unwrap()).collect();
        let first = flags.iter().position(|&f| f).expect("must exhaust");
        assert!(flags[first..].iter().all(|&f| f));
        assert!(flags[..first].iter().all(|&f| !f));
    }

    #[test]
    fn ledger_json_round_trip_and_corruption() {
        let g = OrderGrid::new(vec![1.5, 2.0, 8.0]).unwrap();
        let mut l = BudgetLedger::new(&g, PrivacyBudget::new(3.0, 1e-5).unwrap()).unwrap();
        l.charge(&gaussian_rdp(1.0, 3.0, &g).unwrap()).unwrap();
        let back = BudgetLedger::from_json(&l.to_json().unwrap()).unwrap();
        assert_eq!(back.accumulated(), l.accumulated());
        assert_eq!(back.budget(), l.budget());

        let v: serde_json::Value = serde_json::from_str(&l.to_json().unwrap()).unwrap();
        assert!(v.get("orders").is_some() && v.get("eps").is_some());
        assert!(v["budget"].get("epsilon").is_some() && v["budget"].get("delta").is_some());

        for bad in [
            "not json",
            r#"{"orders":[2.0],"eps":[0.1,0.2],"budget":{"epsilon":1,"delta":0.1}}"#,
            r#"{"orders":[2.0],"eps":[-0.1],"budget":{"epsilon":1,"delta":0.1}}"#,
            r#"{"orders":[0.5],"eps":[0.1],"budget":{"epsilon":1,"delta":0.1}}"#,
            r#"{"orders":[2.0],"eps":[0.1],"budget":{"epsilon":1,"delta":1.5}}"#,
        ] {
            assert!(matches!(BudgetLedger::from_json(bad), Err(Error::CorruptLedger(_))), "{bad}");
        }
    }
}
