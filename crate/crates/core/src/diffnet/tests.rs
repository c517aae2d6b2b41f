use super::jet::{Channels, JetWorkspace};
use super::*;
use crate::embed::PeriodicEmbedding;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn periodic(m: usize) -> SpatialEncoding {
    SpatialEncoding::Periodic(PeriodicEmbedding::new(m, 2.0).unwrap())
}

fn random_params(arch: &MlpArchitecture, seed: u64, bias_scale: f64) -> ParameterVector {
    let mut p = init_params(arch, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb1a5);
    for slot in arch.layer_slots() {
        for b in &mut p.as_mut_slice()[slot.bias..slot.bias + slot.fan_out] {
            *b = bias_scale * (2.0 * rng.random::<f64>() - 1.0);
        }
    }
    p
}

fn eval_ws<R: Real>(
    arch: &MlpArchitecture,
    params: &[R],
    enc: &SpatialEncoding,
    pts: &[(f64, f64)],
    ch: Channels,
) -> JetWorkspace<R> {
    let mut ws = JetWorkspace::new();
    ws.evaluate(arch, params, enc, pts, ch);
    ws
}

fn rel_err(got: f64, want: f64, scale: f64) -> f64 {
    (got - want).abs() / want.abs().max(scale)
}

#[test]
fn zero_network_outputs_zero() {
    let arch = MlpArchitecture::new(vec![3, 5, 5, 2]).unwrap();
    let p = ParameterVector::zeros(&arch);
    let out = forward_batch(&p, &arch, &[vec![0.3, -1.0, 2.0], vec![1.0, 1.0, 1.0]]).unwrap();
    assert!(out.iter().flatten().all(|&v| v == 0.0));
}

#[test]
fn affine_network_without_hidden_layer() {
    let arch = MlpArchitecture::new(vec![1, 1]).unwrap();
    let p = ParameterVector::from_vec(vec![2.0, 3.0]).unwrap();
    assert_eq!(forward_batch(&p, &arch, &[[1.5]]).unwrap(), vec![vec![6.0]]);
}

#[test]
fn width_mismatch_rejected() {
    let arch = MlpArchitecture::new(vec![2, 3, 1]).unwrap();
    let p = init_params(&arch, 0);
    assert!(matches!(
        forward_batch(&p, &arch, &[vec![1.0, 2.0, 3.0]]),
        Err(Error::DimensionMismatch { .. })
    ));
    let short = ParameterVector::from_vec(vec![0.0; 3]).unwrap();
    assert!(forward_batch(&short, &arch, &[vec![1.0, 2.0]]).is_err());
}

#[test]
fn batch_equals_single_point_calls() {
    let arch = MlpArchitecture::new(vec![2, 6, 6, 2]).unwrap();
    let p = random_params(&arch, 4, 0.3);
    let pts = vec![vec![0.1, 0.2], vec![-0.5, 0.9], vec![1.2, -0.3]];
    let batch = forward_batch(&p, &arch, &pts).unwrap();
    for (row, pt) in batch.iter().zip(&pts) {
        let single = forward_batch(&p, &arch, &[pt.clone()]).unwrap();
        assert_eq!(row, &single[0]);
    }
}

#[test]
fn zero_network_has_zero_derivatives() {
    let enc = periodic(3);
    let arch = MlpArchitecture::new(vec![enc.network_input_width(), 4, 2]).unwrap();
    let p = ParameterVector::zeros(&arch);
    let req = DerivativeRequest::new(&DerivativeLabel::ALL);
    let b = input_derivatives(&p, &arch, &[(0.3, 0.7)], req, &enc).unwrap();
    for label in DerivativeLabel::ALL {
        assert_eq!(b[0].get(label), Some(0.0));
    }
}

#[test]
fn single_tanh_unit_closed_form() {
    let (w, b, x) = (1.3, -0.2, 0.5);
    let arch = MlpArchitecture::new(vec![2, 1, 1]).unwrap();
    // hidden: [w_t, w_x], bias b; output: weight 1, bias 0
    let p = ParameterVector::from_vec(vec![0.0, w, b, 1.0, 0.0]).unwrap();
    let req = DerivativeRequest::new(&[DerivativeLabel::U, DerivativeLabel::Ux, DerivativeLabel::Ut]);
    let got = input_derivatives(&p, &arch, &[(0.25, x)], req, &SpatialEncoding::Identity).unwrap()[0];
    let th = (w * x + b).tanh();
    assert!((got.u.unwrap() - th).abs() < 1e-15);
    assert!((got.u_x.unwrap() - w * (1.0 - th * th)).abs() < 1e-15);
    assert_eq!(got.u_t, Some(0.0));
    assert_eq!(got.u_xx, None);
}

#[test]
fn labels_parse_and_reject() {
    let req = DerivativeRequest::parse(&["u", "u_xxx", "mu_xx"]).unwrap();
    assert!(req.contains(DerivativeLabel::Uxxx));
    assert_eq!(req.channels(), Channels::new(3, false));
    assert!(matches!(DerivativeRequest::parse(&["u_xxxx"]), Err(Error::UnknownDerivative(_))));
}

#[test]
fn mu_rejected_for_single_output() {
    let enc = periodic(2);
    let arch = MlpArchitecture::new(vec![enc.network_input_width(), 4, 1]).unwrap();
    let p = init_params(&arch, 1);
    let req = DerivativeRequest::new(&[DerivativeLabel::MuXx]);
    assert!(matches!(
        input_derivatives(&p, &arch, &[(0.0, 0.0)], req, &enc),
        Err(Error::UnsupportedDerivative(DerivativeLabel::MuXx))
    ));
}

fn eval_u(p: &ParameterVector, arch: &MlpArchitecture, enc: &SpatialEncoding, t: f64, x: f64, out: usize) -> f64 {
    let req = DerivativeRequest::new(&[DerivativeLabel::U, DerivativeLabel::Mu]);
    let b = input_derivatives(p, arch, &[(t, x)], req, enc).unwrap()[0];
    if out == 0 {
        b.u.unwrap()
    } else {
        b.mu.unwrap()
    }
}

/// Central finite differences against the jet derivatives.
fn check_against_finite_differences(arch: &MlpArchitecture, p: &ParameterVector, enc: &SpatialEncoding) {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let pts: Vec<(f64, f64)> = (0..12)
        .map(|_| (rng.random::<f64>(), 2.0 * rng.random::<f64>() - 1.0))
        .collect();
    let req = DerivativeRequest::new(&DerivativeLabel::ALL);
    let bundles = input_derivatives(p, arch, &pts, req, enc).unwrap();
    let f = |t: f64, x: f64, o: usize| eval_u(p, arch, enc, t, x, o);

    // scale floor: derivatives that happen to be near zero are compared absolutely
    let mut scale = [0.0f64; 5];
    for b in &bundles {
        for (s, v) in scale.iter_mut().zip([b.u_x, b.u_xx, b.u_xxx, b.u_t, b.mu_xx]) {
            *s = s.max(v.unwrap().abs());
        }
    }
    let floor = scale.map(|s| 1e-2 * s);

    for (b, &(t, x)) in bundles.iter().zip(&pts) {
        let h1 = 1e-4;
        let fd_x = (f(t, x + h1, 0) - f(t, x - h1, 0)) / (2.0 * h1);
        assert!(rel_err(b.u_x.unwrap(), fd_x, floor[0]) < 1e-6, "u_x {} vs {}", b.u_x.unwrap(), fd_x);

        let fd_t = (f(t + h1, x, 0) - f(t - h1, x, 0)) / (2.0 * h1);
        assert!(rel_err(b.u_t.unwrap(), fd_t, floor[3]) < 1e-6, "u_t {} vs {}", b.u_t.unwrap(), fd_t);

        let h2 = 1e-4;
        let fd_xx = (f(t, x + h2, 0) - 2.0 * f(t, x, 0) + f(t, x - h2, 0)) / (h2 * h2);
        assert!(rel_err(b.u_xx.unwrap(), fd_xx, floor[1]) < 1e-4, "u_xx {} vs {}", b.u_xx.unwrap(), fd_xx);

        let h3 = 1e-3;
        let fd_xxx = (f(t, x + 2.0 * h3, 0) - 2.0 * f(t, x + h3, 0) + 2.0 * f(t, x - h3, 0) - f(t, x - 2.0 * h3, 0))
            / (2.0 * h3 * h3 * h3);
        assert!(rel_err(b.u_xxx.unwrap(), fd_xxx, floor[2]) < 1e-3, "u_xxx {} vs {}", b.u_xxx.unwrap(), fd_xxx);

        let fd_mxx = (f(t, x + h2, 1) - 2.0 * f(t, x, 1) + f(t, x - h2, 1)) / (h2 * h2);
        assert!(rel_err(b.mu_xx.unwrap(), fd_mxx, floor[4]) < 1e-4, "mu_xx {} vs {}", b.mu_xx.unwrap(), fd_mxx);
    }
}

#[test]
fn jet_derivatives_match_finite_differences_periodic() {
    let enc = periodic(1);
    let arch = MlpArchitecture::new(vec![enc.network_input_width(), 10, 10, 2]).unwrap();
    for seed in 0..3 {
        check_against_finite_differences(&arch, &random_params(&arch, seed, 0.5), &enc);
    }
}

#[test]
fn jet_derivatives_match_finite_differences_identity() {
    let enc = SpatialEncoding::Identity;
    let arch = MlpArchitecture::new(vec![2, 8, 8, 8, 2]).unwrap();
    check_against_finite_differences(&arch, &random_params(&arch, 11, 0.5), &enc);
}

#[test]
fn embedding_chain_rule_matches_analytic_features() {
    // input (t, v(x)) -> output v(x): identity on the embedded block, no hidden layer
    let emb = PeriodicEmbedding::new(4, 2.0).unwrap();
    let enc = SpatialEncoding::Periodic(emb);
    let w = emb.width();
    let arch = MlpArchitecture::new(vec![w + 1, w]).unwrap();
    let mut p = vec![0.0; arch.param_count()];
    for j in 0..w {
        p[j * (w + 1) + j + 1] = 1.0;
    }
    let x = 0.3141;
    let eval = eval_ws::<f64>(&arch, &p, &enc, &[(0.2, x)], Channels::new(1, false));
    let omega = emb.omega();
    for k in 1..=4 {
        let a = k as f64 * omega;
        let want_cos = -a * (a * x).sin();
        let want_sin = a * (a * x).cos();
        assert!(rel_err(eval.get(1, 0, 2 * k - 1), want_cos, 0.0) < 1e-8);
        assert!(rel_err(eval.get(1, 0, 2 * k), want_sin, 0.0) < 1e-8);
    }
}

/// A synthetic objective touching every channel nonlinearly.
struct JetObjective {
    arch: MlpArchitecture,
    enc: SpatialEncoding,
    points: Vec<(f64, f64)>,
}

impl Objective for JetObjective {
    fn param_count(&self) -> usize {
        self.arch.param_count()
    }

    fn evaluate(&self, params: &[f64], grad: Option<&mut [f64]>) -> Result<f64> {
        let ch = Channels::new(3, true);
        let mut eval = eval_ws::<f64>(&self.arch, params, &self.enc, &self.points, ch);
        let n = self.points.len();
        let mut g = vec![0.0; eval.outputs().len()];
        let mut loss = 0.0;
        let idx = |c: usize, p: usize, o: usize| (c * n + p) * 2 + o;
        for p in 0..n {
            let (u, ux, uxx, uxxx, ut) = (eval.get(0, p, 0), eval.get(1, p, 0), eval.get(2, p, 0), eval.get(3, p, 0), eval.get(4, p, 0));
            let (mu, muxx) = (eval.get(0, p, 1), eval.get(2, p, 1));
            let r1 = ut + u * ux + 0.01 * uxxx;
            let r2 = mu - (u * u * u - u) + 0.02 * uxx;
            let r3 = ut - muxx;
            loss += r1 * r1 + r2 * r2 + r3 * r3;
            g[idx(4, p, 0)] += 2.0 * r1 + 2.0 * r3;
            g[idx(0, p, 0)] += 2.0 * r1 * ux - 2.0 * r2 * (3.0 * u * u - 1.0);
            g[idx(1, p, 0)] += 2.0 * r1 * u;
            g[idx(3, p, 0)] += 2.0 * r1 * 0.01;
            g[idx(0, p, 1)] += 2.0 * r2;
            g[idx(2, p, 0)] += 2.0 * r2 * 0.02;
            g[idx(2, p, 1)] -= 2.0 * r3;
        }
        for v in &mut g {
            *v /= n as f64;
        }
        if let Some(grad) = grad {
            eval.backward(&self.arch, params, &g, grad);
        }
        Ok(loss / n as f64)
    }
}

#[test]
fn jet_gradient_matches_finite_differences() {
    let enc = periodic(2);
    let arch = MlpArchitecture::new(vec![enc.network_input_width(), 8, 8, 2]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let points = (0..7).map(|_| (rng.random::<f64>(), 2.0 * rng.random::<f64>() - 1.0)).collect();
    let obj = JetObjective { arch: arch.clone(), enc, points };
    let theta = random_params(&arch, 21, 0.4).into_vec();
    let grad = loss_gradient(&obj, &theta).unwrap();
    let h = 1e-5;
    for _ in 0..20 {
        let i = rng.random_range(0..theta.len());
        let mut tp = theta.clone();
        tp[i] += h;
        let fp = obj.evaluate(&tp, None).unwrap();
        tp[i] -= 2.0 * h;
        let fm = obj.evaluate(&tp, None).unwrap();
        let fd = (fp - fm) / (2.0 * h);
        let scale = grad.iter().fold(0.0f64, |m, g| m.max(g.abs())) * 1e-3;
        assert!(rel_err(grad[i], fd, scale) < 1e-5, "coord {i}: {} vs {}", grad[i], fd);
    }
}

struct HalfSquaredNorm;

impl Objective for HalfSquaredNorm {
    fn param_count(&self) -> usize {
        4
    }
    fn evaluate(&self, params: &[f64], grad: Option<&mut [f64]>) -> Result<f64> {
        if let Some(g) = grad {
            g.copy_from_slice(params);
        }
        Ok(params.iter().map(|v| v * v).sum::<f64>() / 2.0)
    }
}

struct NanLoss;

impl Objective for NanLoss {
    fn param_count(&self) -> usize {
        1
    }
    fn evaluate(&self, _: &[f64], _: Option<&mut [f64]>) -> Result<f64> {
        Ok(f64::NAN)
    }
}

#[test]
fn quadratic_gradient_is_identity() {
    let theta = [0.5, -1.0, 2.0, 0.0];
    assert_eq!(loss_gradient(&HalfSquaredNorm, &theta).unwrap(), theta.to_vec());
    assert!(loss_gradient(&HalfSquaredNorm, &[0.0; 4]).unwrap().iter().all(|g| g.abs() < 1e-12));
}

#[test]
fn non_finite_loss_is_an_error() {
    assert!(matches!(loss_gradient(&NanLoss, &[1.0]), Err(Error::NonFinite(_))));
}

#[test]
fn single_precision_tracks_double() {
    let enc = periodic(3);
    let arch = MlpArchitecture::new(vec![enc.network_input_width(), 16, 16, 1]).unwrap();
    let p = random_params(&arch, 2, 0.2);
    let pts = [(0.1, 0.2), (0.9, -0.7)];
    let ch = Channels::new(3, true);
    let a = eval_ws::<f64>(&arch, p.as_slice(), &enc, &pts, ch);
    let pf: Vec<f32> = super::jet::convert_params(p.as_slice());
    let b = eval_ws::<f32>(&arch, &pf, &enc, &pts, ch);
    let scale = a.outputs().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (x, y) in a.outputs().iter().zip(b.outputs()) {
        assert!((x - y).abs() < 1e-4 * scale);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn forward_is_permutation_equivariant(seed in 0u64..1000, shift in 1usize..5) {
        let arch = MlpArchitecture::new(vec![3, 7, 2]).unwrap();
        let p = random_params(&arch, seed, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vec<f64>> = (0..6).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
        let mut rotated = pts.clone();
        rotated.rotate_left(shift);
        let a = forward_batch(&p, &arch, &pts).unwrap();
        let mut b = forward_batch(&p, &arch, &rotated).unwrap();
        b.rotate_right(shift);
        prop_assert_eq!(a, b);
    }
}


#[test]
#[ignore]
fn bench_jet_pass() {
    let enc = periodic(10);
    for (name, width, n, ch, outs) in [("kdv", 64, 300, Channels::new(3, true), 1), ("ch", 64, 1000, Channels::new(2, true), 2), ("ch128", 128, 1000, Channels::new(2, true), 2)] {
        let arch = MlpArchitecture::new(vec![enc.network_input_width(), width, width, width, width, outs]).unwrap();
        let p = init_params(&arch, 1);
        let pts: Vec<(f64, f64)> = (0..n).map(|i| (i as f64 / n as f64, (i as f64 * 0.37) % 1.0)).collect();
        let start = std::time::Instant::now();
        let reps = 20;
        let mut e = JetWorkspace::<f64>::new();
        let mut grad = vec![0.0; arch.param_count()];
        for _ in 0..reps {
            e.evaluate(&arch, p.as_slice(), &enc, &pts, ch);
            let g = vec![1.0; e.outputs().len()];
            e.backward(&arch, p.as_slice(), &g, &mut grad);
        }
        println!("{name}: {:.2} ms/iter", start.elapsed().as_secs_f64() * 1000.0 / reps as f64);
        let start = std::time::Instant::now();
        for _ in 0..reps {
            e.evaluate(&arch, p.as_slice(), &enc, &pts, ch);
        }
        println!("{name} fwd: {:.2} ms/iter", start.elapsed().as_secs_f64() * 1000.0 / reps as f64);
        let start = std::time::Instant::now();
        for _ in 0..reps {
            let mut v: Vec<f64> = Vec::new();
            super::jet::seed_inputs_into(&pts, &enc, ch, &mut v);
            std::hint::black_box(v);
        }
        println!("{name} seed: {:.2} ms/iter", start.elapsed().as_secs_f64() * 1000.0 / reps as f64);
        let rows = ch.count() * n;
        let a = vec![0.5; rows * width];
        let w = vec![0.5; width * width];
        let mut c = vec![0.0; rows * width];
        let start = std::time::Instant::now();
        for _ in 0..reps * 10 {
            super::real::gemm(rows, width, width, 1.0, super::real::Strided::row_major(&a, width), super::real::Strided::transposed(&w, width), 0.0, &mut c);
        }
        let el = start.elapsed().as_secs_f64() / (reps * 10) as f64;
        println!("{name} gemm: {:.3} ms, {:.1} GF/s", el * 1e3, 2.0 * (rows * width * width) as f64 / el / 1e9);
    }
}
