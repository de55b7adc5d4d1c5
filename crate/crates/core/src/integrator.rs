//! Adaptive Dormand-Prince 8(5) integrator for the equations of motion.

use crate::error::{Error, Result};
use crate::model::{eom_rhs, ModelConfig, PhaseState};

const C: [f64; 12] = [
    0.0,
    0.526001519587677318785587544488e-01,
    0.789002279381515978178381316732e-01,
    0.118350341907227396726757197510,
    0.281649658092772603273242802490,
    0.333333333333333333333333333333,
    0.25,
    0.307692307692307692307692307692,
    0.651282051282051282051282051282,
    0.6,
    0.857142857142857142857142857142,
    1.0,
];

// rows of the lower triangular tableau, stage i uses A[i][..i]
const A: [[f64; 11]; 12] = [
    [0.0; 11],
    [5.26001519587677318785587544488e-02, 0., 0., 0., 0., 0., 0., 0., 0., 0., 0.],
    [1.97250569845378994544595329183e-02, 5.91751709536136983633785987549e-02, 0., 0., 0., 0., 0., 0., 0., 0., 0.],
    [2.95875854768068491816892993775e-02, 0., 8.87627564304205475450678981324e-02, 0., 0., 0., 0., 0., 0., 0., 0.],
    [2.41365134159266685502369798665e-01, 0., -8.84549479328286085344864962717e-01, 9.24834003261792003115737966543e-01, 0., 0., 0., 0., 0., 0., 0.],
    [3.70370370370370370370370370370e-02, 0., 0., 1.70828608729473871279604482173e-01, 1.25467687566822425016691814123e-01, 0., 0., 0., 0., 0., 0.],
    [3.71093750000000000000000000000e-02, 0., 0., 1.70252211019544039314978060272e-01, 6.02165389804559606850219397283e-02, -1.75781250000000000000000000000e-02, 0., 0., 0., 0., 0.],
    [3.70920001185047927108779319836e-02, 0., 0., 1.70383925712239993810214054705e-01, 1.07262030446373284651809199168e-01, -1.53194377486244017527936158236e-02, 8.27378916381402288758473766002e-03, 0., 0., 0., 0.],
    [6.24110958716075717114429577812e-01, 0., 0., -3.36089262944694129406857109825e+00, -8.68219346841726006818189891453e-01, 2.75920996994467083049415600797e+01, 2.01540675504778934086186788979e+01, -4.34898841810699588477366255144e+01, 0., 0., 0.],
    [4.77662536438264365890433908527e-01, 0., 0., -2.48811461997166764192642586468e+00, -5.90290826836842996371446475743e-01, 2.12300514481811942347288949897e+01, 1.52792336328824235832596922938e+01, -3.32882109689848629194453265587e+01, -2.03312017085086261358222928593e-02, 0., 0.],
    [-9.37142430085987325717040528057e-01, 0., 0., 5.18637242884406370830023853209e+00, 1.09143734899672957818500254654e+00, -8.14978701074692612513997267357e+00, -1.85200656599969598641566180701e+01, 2.27394870993505042818970056734e+01, 2.49360555267965238987089396762e+00, -3.04676447189821950038236690220e+00, 0.],
    [2.27331014751653820792359768449e+00, 0., 0., -1.05344954667372501984066689879e+01, -2.00087205822486249909675718444e+00, -1.79589318631187989172765950534e+01, 2.79488845294199600508499808837e+01, -2.85899827713502369474065508674e+00, -8.87285693353062954433549289258e+00, 1.23605671757943030647266201528e+01, 6.43392746015763530355970484046e-01],
];

const B: [f64; 12] = [
    5.42937341165687622380535766363e-02,
    0.,
    0.,
    0.,
    0.,
    4.45031289275240888144113950566e+00,
    1.89151789931450038304281599044e+00,
    -5.80120396001058478146721142270e+00,
    3.11164366957819894408916062370e-01,
    -1.52160949662516078556178806805e-01,
    2.01365400804030348374776537501e-01,
    4.47106157277725905176885569043e-02,
];

const E5: [f64; 12] = [
    0.1312004499419488073250102996e-01,
    0.,
    0.,
    0.,
    0.,
    -0.1225156446376204440720569753e+01,
    -0.4957589496572501915214079952e+00,
    0.1664377182454986536961530415e+01,
    -0.3503288487499736816886487290e+00,
    0.3341791187130174790297318841e+00,
    0.8192320648511571246570742613e-01,
    -0.2235530786388629525884427845e-01,
];

/// Relative and absolute tolerance plus a step budget.
#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Tolerance {
    pub fn uniform(tol: f64) -> Self {
        Self { rtol: tol, atol: tol, max_steps: 2_000_000 }
    }
}

/// Integrates `y' = rhs(t, y)` from `t0` and returns the state at each
/// requested time; `t_out` must be monotone in the direction of travel.
pub fn integrate(
    rhs: impl Fn(f64, &[f64]) -> Vec<f64>,
    t0: f64,
    y0: &[f64],
    t_out: &[f64],
    tol: Tolerance,
) -> Result<Vec<Vec<f64>>> {
    let n = y0.len();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut out = Vec::with_capacity(t_out.len());
    let Some(&t_end) = t_out.last() else { return Ok(out) };
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 12];
    k[0] = rhs(t, &y);
    let mut h = dir * initial_step(&y, &k[0], tol).min((t_end - t0).abs().max(1e-300));
    let mut next = 0;
    let mut steps = 0;
    let mut ytmp = vec![0.0; n];
    while next < t_out.len() {
        let target = t_out[next];
        if (target - t) * dir <= 0.0 {
            out.push(y.clone());
            next += 1;
            continue;
        }
        steps += 1;
        if steps > tol.max_steps {
            return Err(Error::NoConvergence { what: "dop853", iters: steps, residual: h.abs() });
        }
        let hit = (t + h - target) * dir >= 0.0;
        let hs = if hit { target - t } else { h };
        if hs.abs() < 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepUnderflow { t });
        }
        for s in 1..12 {
            for i in 0..n {
                let acc: f64 = (0..s).map(|j| A[s][j] * k[j][i]).sum();
                ytmp[i] = y[i] + hs * acc;
            }
            k[s] = rhs(t + C[s] * hs, &ytmp);
        }
        let mut ynew = vec![0.0; n];
        let mut err = 0.0;
        for i in 0..n {
            let inc: f64 = (0..12).map(|j| B[j] * k[j][i]).sum();
            ynew[i] = y[i] + hs * inc;
            let e: f64 = hs * (0..12).map(|j| E5[j] * k[j][i]).sum::<f64>();
            let sc = tol.atol + tol.rtol * y[i].abs().max(ynew[i].abs());
            err += (e / sc).powi(2);
        }
        let err = (err / n as f64).sqrt();
        let fac = (0.9 * err.max(1e-10).powf(-1.0 / 8.0)).clamp(0.333, 6.0);
        if err <= 1.0 {
            t = if hit { target } else { t + hs };
            y = ynew;
            k[0] = rhs(t, &y);
            if !hit {
                h = hs * fac;
            }
        } else {
            h = hs * fac.min(1.0);
        }
    }
    Ok(out)
}

fn initial_step(y: &[f64], f: &[f64], tol: Tolerance) -> f64 {
    let n = y.len() as f64;
    let sc = |i: usize| tol.atol + tol.rtol * y[i].abs();
    let d0 = (y.iter().enumerate().map(|(i, v)| (v / sc(i)).powi(2)).sum::<f64>() / n).sqrt();
    let d1 = (f.iter().enumerate().map(|(i, v)| (v / sc(i)).powi(2)).sum::<f64>() / n).sqrt();
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.clamp(1e-8, 0.1)
}

/// Orbit of the forced pendulum sampled at `times`.
pub fn integrate_orbit(cfg: &ModelConfig, s0: &PhaseState, t0: f64, times: &[f64], tol: Tolerance) -> Result<Vec<PhaseState>> {
    let pert = cfg.perturbation();
    let rhs = |_t: f64, y: &[f64]| eom_rhs(cfg, &pert, &PhaseState::from_slice(y)).to_vec();
    Ok(integrate(rhs, t0, &s0.to_vec(), times, tol)?.iter().map(|v| PhaseState::from_slice(v)).collect())
}

/// CSV with columns `t,phi,psi_1..,I,A_1..`.
pub fn trajectory_csv(times: &[f64], states: &[PhaseState]) -> String {
    let d = states.first().map_or(0, |s| s.psi.len());
    let mut s = String::from("t,phi");
    for i in 1..=d {
        s += &format!(",psi_{i}");
    }
    s += ",I";
    for i in 1..=d {
        s += &format!(",A_{i}");
    }
    s.push('\n');
    for (t, st) in times.iter().zip(states) {
        s += &format!("{t:.16e}");
        for v in st.to_vec() {
            s += &format!(",{v:.16e}");
        }
        s.push('\n');
    }
    s
}
