#![allow(clippy::excessive_precision)]
//! Independent reference propagation: an adaptive 8(5,3) Dormand-Prince
//! Runge-Kutta pair driven by the continuous-time force model.
//!
//! Nothing here touches the collocation machinery; the only shared piece is
//! the force model itself.

use serde::{Deserialize, Serialize};

use crate::dynamics::{relative_state_error, DynamicsError, ForceModelConfig, StateVector};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("oracle step budget of {0} steps exhausted")]
    StepBudget(usize),
    #[error("oracle step size underflow at t = {0}")]
    StepSize(f64),
    #[error("invalid oracle configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
}

impl OracleConfig {
    /// Convergence order of the propagated solution.
    pub const ORDER: usize = 8;
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-13,
            abs_tol: 1e-16,
            max_steps: 1_000_000,
        }
    }
}

/// First-order dynamics `dy/dt` at an arbitrary epoch.
pub trait ContinuousDynamics {
    fn derivative(&self, t: f64, y: &[f64; 6]) -> Result<[f64; 6], DynamicsError>;
}

impl ContinuousDynamics for ForceModelConfig {
    fn derivative(&self, t: f64, y: &[f64; 6]) -> Result<[f64; 6], DynamicsError> {
        let a = self.acceleration_at(t, &[y[0], y[1], y[2]])?;
        Ok([y[3], y[4], y[5], a[0], a[1], a[2]])
    }
}

type Vec6 = [f64; 6];

#[inline]
fn comb(y: &Vec6, h: f64, terms: &[(f64, &Vec6)]) -> Vec6 {
    std::array::from_fn(|i| y[i] + h * terms.iter().map(|(c, k)| c * k[i]).sum::<f64>())
}

const A21: f64 = 5.26001519587677318785587544488E-2;
const A31: f64 = 1.97250569845378994544595329183E-2;
const A32: f64 = 5.91751709536136983633785987549E-2;
const A41: f64 = 2.95875854768068491816892993775E-2;
const A43: f64 = 8.87627564304205475450678981324E-2;
const A51: f64 = 2.41365134159266685502369798665E-1;
const A53: f64 = -8.84549479328286085344864962717E-1;
const A54: f64 = 9.24834003261792003115737966543E-1;
const A61: f64 = 3.7037037037037037037037037037E-2;
const A64: f64 = 1.70828608729473871279604482173E-1;
const A65: f64 = 1.25467687566822425016691814123E-1;
const A71: f64 = 3.7109375E-2;
const A74: f64 = 1.70252211019544039314978060272E-1;
const A75: f64 = 6.02165389804559606850219397283E-2;
const A76: f64 = -1.7578125E-2;
const A81: f64 = 3.70920001185047927108779319836E-2;
const A84: f64 = 1.70383925712239993810214054705E-1;
const A85: f64 = 1.07262030446373284651809199168E-1;
const A86: f64 = -1.53194377486244017527936158236E-2;
const A87: f64 = 8.27378916381402288758473766002E-3;
const A91: f64 = 6.24110958716075717114429577812E-1;
const A94: f64 = -3.36089262944694129406857109825E0;
const A95: f64 = -8.68219346841726006818189891453E-1;
const A96: f64 = 2.75920996994467083049415600797E1;
const A97: f64 = 2.01540675504778934086186788979E1;
const A98: f64 = -4.34898841810699588477366255144E1;
const A101: f64 = 4.77662536438264365890433908527E-1;
const A104: f64 = -2.48811461997166764192642586468E0;
const A105: f64 = -5.90290826836842996371446475743E-1;
const A106: f64 = 2.12300514481811942347288949897E1;
const A107: f64 = 1.52792336328824235832596922938E1;
const A108: f64 = -3.32882109689848629194453265587E1;
const A109: f64 = -2.03312017085086261358222928593E-2;
const A111: f64 = -9.3714243008598732571704021658E-1;
const A114: f64 = 5.18637242884406370830023853209E0;
const A115: f64 = 1.09143734899672957818500254654E0;
const A116: f64 = -8.14978701074692612513997267357E0;
const A117: f64 = -1.85200656599969598641566180701E1;
const A118: f64 = 2.27394870993505042818970056734E1;
const A119: f64 = 2.49360555267965238987089396762E0;
const A1110: f64 = -3.0467644718982195003823669022E0;
const A121: f64 = 2.27331014751653820792359768449E0;
const A124: f64 = -1.05344954667372501984066689879E1;
const A125: f64 = -2.00087205822486249909675718444E0;
const A126: f64 = -1.79589318631187989172765950534E1;
const A127: f64 = 2.79488845294199600508499808837E1;
const A128: f64 = -2.85899827713502369474065508674E0;
const A129: f64 = -8.87285693353062954433549289258E0;
const A1210: f64 = 1.23605671757943030647266201528E1;
const A1211: f64 = 6.43392746015763530355970484046E-1;
const B1: f64 = 5.42937341165687622380535766363E-2;
const B6: f64 = 4.45031289275240888144113950566E0;
const B7: f64 = 1.89151789931450038304281599044E0;
const B8: f64 = -5.8012039600105847814672114227E0;
const B9: f64 = 3.1116436695781989440891606237E-1;
const B10: f64 = -1.52160949662516078556178806805E-1;
const B11: f64 = 2.01365400804030348374776537501E-1;
const B12: f64 = 4.47106157277725905176885569043E-2;
const BHH1: f64 = 0.244094488188976377952755905512E+00;
const BHH2: f64 = 0.733846688281611857341361741547E+00;
const BHH3: f64 = 0.220588235294117647058823529412E-01;
const C2: f64 = 0.526001519587677318785587544488E-01;
const C3: f64 = 0.789002279381515978178381316732E-01;
const C4: f64 = 0.118350341907227396726757197510E+00;
const C5: f64 = 0.281649658092772603273242802490E+00;
const C6: f64 = 0.333333333333333333333333333333E+00;
const C7: f64 = 0.25E+00;
const C8: f64 = 0.307692307692307692307692307692E+00;
const C9: f64 = 0.651282051282051282051282051282E+00;
const C10: f64 = 0.6E+00;
const C11: f64 = 0.857142857142857142857142857142E+00;
const ER1: f64 = 0.1312004499419488073250102996E-01;
const ER6: f64 = -0.1225156446376204440720569753E+01;
const ER7: f64 = -0.4957589496572501915214079952E+00;
const ER8: f64 = 0.1664377182454986536961530415E+01;
const ER9: f64 = -0.3503288487499736816886487290E+00;
const ER10: f64 = 0.3341791187130174790297318841E+00;
const ER11: f64 = 0.8192320648511571246570742613E-01;
const ER12: f64 = -0.2235530786388629525884427845E-01;

const NORM_FLOOR: f64 = 1e-30;
const SAFE: f64 = 0.9;
const FAC_MIN: f64 = 0.333;
const FAC_MAX: f64 = 6.0;

/// Integrator state carried across successive output epochs.
struct Dop853<'a, D: ContinuousDynamics> {
    dynamics: &'a D,
    cfg: OracleConfig,
    t: f64,
    y: Vec6,
    k1: Vec6,
    h: f64,
    steps: usize,
}

impl<'a, D: ContinuousDynamics> Dop853<'a, D> {
    fn new(dynamics: &'a D, cfg: OracleConfig, t: f64, y: Vec6) -> Result<Self, OracleError> {
        if !(cfg.rel_tol > 0.0 && cfg.abs_tol >= 0.0) {
            return Err(OracleError::Config(format!(
                "tolerances must be positive (rel {}, abs {})",
                cfg.rel_tol, cfg.abs_tol
            )));
        }
        let k1 = dynamics.derivative(t, &y)?;
        Ok(Self {
            dynamics,
            cfg,
            t,
            y,
            k1,
            h: 0.0,
            steps: 0,
        })
    }

    fn scale(&self, i: usize, a: &Vec6, b: &Vec6) -> f64 {
        self.cfg.abs_tol + self.cfg.rel_tol * a[i].abs().max(b[i].abs())
    }

    /// Hairer's starting step heuristic.
    fn initial_step(&self, direction: f64) -> Result<f64, OracleError> {
        let norm = |v: &Vec6| {
            (v.iter()
                .enumerate()
                .map(|(i, x)| (x / self.scale(i, &self.y, &self.y)).powi(2))
                .sum::<f64>()
                / 6.0)
                .sqrt()
        };
        let d0 = norm(&self.y);
        let d1 = norm(&self.k1);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let y1 = comb(&self.y, direction * h0, &[(1.0, &self.k1)]);
        let f1 = self.dynamics.derivative(self.t + direction * h0, &y1)?;
        let diff: Vec6 = std::array::from_fn(|i| f1[i] - self.k1[i]);
        let d2 = norm(&diff) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / OracleConfig::ORDER as f64)
        };
        Ok(direction * (100.0 * h0).min(h1))
    }

    /// Advances exactly to `t_out`.
    fn integrate_to(&mut self, t_out: f64) -> Result<(), OracleError> {
        if t_out == self.t {
            return Ok(());
        }
        let direction = (t_out - self.t).signum();
        if self.h == 0.0 || self.h.signum() != direction {
            self.h = self.initial_step(direction)?;
        }
        let mut last_rejected = false;
        loop {
            if self.steps >= self.cfg.max_steps {
                return Err(OracleError::StepBudget(self.cfg.max_steps));
            }
            let remaining = t_out - self.t;
            let mut h = self.h;
            let mut hits_end = false;
            if (h - remaining) * direction >= 0.0 {
                h = remaining;
                hits_end = true;
            }
            if h.abs() <= 1e-14 * self.t.abs().max(1.0) && !hits_end {
                return Err(OracleError::StepSize(self.t));
            }
            self.steps += 1;
            let (y_new, err) = self.step(h)?;
            let fac11 = err.powf(1.0 / 8.0);
            if err <= 1.0 {
                let k_new = self.dynamics.derivative(self.t + h, &y_new)?;
                self.t = if hits_end { t_out } else { self.t + h };
                self.y = y_new;
                self.k1 = k_new;
                let fac = (fac11 / SAFE).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                let mut h_new = h / fac;
                if last_rejected {
                    h_new = if direction > 0.0 { h_new.min(h) } else { h_new.max(h) };
                }
                last_rejected = false;
                // Keep the pre-truncation step so the next output interval starts sensibly.
                if !hits_end || h_new.abs() > self.h.abs() {
                    self.h = h_new;
                }
                if hits_end {
                    return Ok(());
                }
            } else {
                self.h = h / (1.0 / FAC_MIN).min(fac11 / SAFE);
                last_rejected = true;
            }
        }
    }

    /// One embedded step; returns the 8th-order solution and the scaled error norm.
    fn step(&self, h: f64) -> Result<(Vec6, f64), OracleError> {
        let f = |dt: f64, y: &Vec6| self.dynamics.derivative(self.t + dt, y);
        let y = &self.y;
        let k1 = &self.k1;
        let k2 = f(C2 * h, &comb(y, h, &[(A21, k1)]))?;
        let k3 = f(C3 * h, &comb(y, h, &[(A31, k1), (A32, &k2)]))?;
        let k4 = f(C4 * h, &comb(y, h, &[(A41, k1), (A43, &k3)]))?;
        let k5 = f(C5 * h, &comb(y, h, &[(A51, k1), (A53, &k3), (A54, &k4)]))?;
        let k6 = f(C6 * h, &comb(y, h, &[(A61, k1), (A64, &k4), (A65, &k5)]))?;
        let k7 = f(C7 * h, &comb(y, h, &[(A71, k1), (A74, &k4), (A75, &k5), (A76, &k6)]))?;
        let k8 = f(
            C8 * h,
            &comb(y, h, &[(A81, k1), (A84, &k4), (A85, &k5), (A86, &k6), (A87, &k7)]),
        )?;
        let k9 = f(
            C9 * h,
            &comb(y, h, &[(A91, k1), (A94, &k4), (A95, &k5), (A96, &k6), (A97, &k7), (A98, &k8)]),
        )?;
        let k10 = f(
            C10 * h,
            &comb(
                y,
                h,
                &[(A101, k1), (A104, &k4), (A105, &k5), (A106, &k6), (A107, &k7), (A108, &k8), (A109, &k9)],
            ),
        )?;
        let k11 = f(
            C11 * h,
            &comb(
                y,
                h,
                &[
                    (A111, k1),
                    (A114, &k4),
                    (A115, &k5),
                    (A116, &k6),
                    (A117, &k7),
                    (A118, &k8),
                    (A119, &k9),
                    (A1110, &k10),
                ],
            ),
        )?;
        let k12 = f(
            h,
            &comb(
                y,
                h,
                &[
                    (A121, k1),
                    (A124, &k4),
                    (A125, &k5),
                    (A126, &k6),
                    (A127, &k7),
                    (A128, &k8),
                    (A129, &k9),
                    (A1210, &k10),
                    (A1211, &k11),
                ],
            ),
        )?;
        let incr: Vec6 = std::array::from_fn(|i| {
            B1 * k1[i] + B6 * k6[i] + B7 * k7[i] + B8 * k8[i] + B9 * k9[i] + B10 * k10[i] + B11 * k11[i] + B12 * k12[i]
        });
        let y_new: Vec6 = std::array::from_fn(|i| y[i] + h * incr[i]);

        let mut err = 0.0;
        let mut err2 = 0.0;
        for i in 0..6 {
            let sk = self.scale(i, y, &y_new);
            let e3 = incr[i] - BHH1 * k1[i] - BHH2 * k9[i] - BHH3 * k12[i];
            err2 += (e3 / sk).powi(2);
            let e5 = ER1 * k1[i]
                + ER6 * k6[i]
                + ER7 * k7[i]
                + ER8 * k8[i]
                + ER9 * k9[i]
                + ER10 * k10[i]
                + ER11 * k11[i]
                + ER12 * k12[i];
            err += (e5 / sk).powi(2);
        }
        let mut deno = err + 0.01 * err2;
        if deno <= 0.0 {
            deno = 1.0;
        }
        let err = h.abs() * err * (1.0 / (deno * 6.0)).sqrt();
        Ok((y_new, err))
    }
}

/// Propagates `state` to `t_end` with the reference integrator.
pub fn rk_propagate<D: ContinuousDynamics>(
    state: &StateVector,
    dynamics: &D,
    t_end: f64,
    cfg: &OracleConfig,
) -> Result<StateVector, OracleError> {
    let mut integ = Dop853::new(dynamics, *cfg, state.epoch, state.to_array())?;
    integ.integrate_to(t_end)?;
    Ok(StateVector::from_slice(t_end, &integ.y))
}

/// Reference states at each epoch of `times`, integrating continuously from `state`.
pub fn rk_sample<D: ContinuousDynamics>(
    state: &StateVector,
    dynamics: &D,
    times: &[f64],
    cfg: &OracleConfig,
) -> Result<Vec<StateVector>, OracleError> {
    let mut integ = Dop853::new(dynamics, *cfg, state.epoch, state.to_array())?;
    times
        .iter()
        .map(|&t| {
            integ.integrate_to(t)?;
            Ok(StateVector::from_slice(t, &integ.y))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDiscrepancy {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub max_position: f64,
    pub max_velocity: f64,
}

impl TrajectoryDiscrepancy {
    pub fn max(&self) -> f64 {
        self.max_position.max(self.max_velocity)
    }
}

/// Per-node relative position and velocity discrepancies of `samples` against `reference`.
pub fn compare_trajectories(samples: &[StateVector], reference: &[StateVector]) -> TrajectoryDiscrepancy {
    let floor = NORM_FLOOR;
    let mut position = Vec::with_capacity(samples.len());
    let mut velocity = Vec::with_capacity(samples.len());
    for (s, r) in samples.iter().zip(reference) {
        let pos_only = StateVector { v: r.v, ..*s };
        let vel_only = StateVector { r: r.r, ..*s };
        position.push(relative_state_error(&pos_only, r, floor));
        velocity.push(relative_state_error(&vel_only, r, floor));
    }
    let max_position = position.iter().cloned().fold(0.0, f64::max);
    let max_velocity = velocity.iter().cloned().fold(0.0, f64::max);
    TrajectoryDiscrepancy {
        position,
        velocity,
        max_position,
        max_velocity,
    }
}

/// Integrates the reference from the first sample through all sample epochs and compares.
pub fn oracle_discrepancy<D: ContinuousDynamics>(
    samples: &[StateVector],
    dynamics: &D,
    cfg: &OracleConfig,
) -> Result<TrajectoryDiscrepancy, OracleError> {
    let Some(first) = samples.first() else {
        return Ok(compare_trajectories(&[], &[]));
    };
    let times: Vec<f64> = samples.iter().map(|s| s.epoch).collect();
    let reference = rk_sample(first, dynamics, &times, cfg)?;
    Ok(compare_trajectories(samples, &reference))
}
