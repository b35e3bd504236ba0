use proptest::prelude::*;
use rand::Rng;
use shadowda_core::rng;
use shadowda_core::tensornn::*;

const STEP: f64 = 1e-5;

fn rand_vec(len: usize, seed: u64) -> Vec<f64> {
    let mut g = rng::from_seed(seed);
    (0..len).map(|_| g.random_range(-1.0..1.0)).collect()
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / (a.abs() + n.abs()).max(1e-5)
}

/// Central differences of `f` at `x` against `analytic`.
fn check_fd(x: &[f64], analytic: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let mut worst: f64 = 0.0;
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        xp[i] = x[i] + STEP;
        let up = f(&xp);
        xp[i] = x[i] - STEP;
        let dn = f(&xp);
        xp[i] = x[i];
        worst = worst.max(rel_err(analytic[i], (up - dn) / (2.0 * STEP)));
    }
    worst
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn conv1d_gradients() {
    let (bn, cin, ln, cout) = (3, 2, 5, 4);
    let x = Tensor3 { batch: bn, channels: cin, length: ln, data: rand_vec(bn * cin * ln, 1) };
    let w = rand_vec(cout * cin * 3, 2);
    let b = rand_vec(cout, 3);
    let r = rand_vec(bn * cout * ln, 4);
    let (y, cols) = conv1d_forward(&x, &w, &b, cout);
    let dy = Tensor3 { data: r.clone(), ..y.clone() };
    let mut dw = vec![0.0; w.len()];
    let mut db = vec![0.0; b.len()];
    let dx = conv1d_backward((bn, cin, ln), &cols, &w, &dy, &mut dw, &mut db);
    let loss = |x: &Tensor3, w: &[f64], b: &[f64]| dot(&conv1d_forward(x, w, b, cout).0.data, &r);
    assert!(check_fd(&x.data, &dx.data, |v| loss(&Tensor3 { data: v.to_vec(), ..x.clone() }, &w, &b)) < 1e-4);
    assert!(check_fd(&w, &dw, |v| loss(&x, v, &b)) < 1e-4);
    assert!(check_fd(&b, &db, |v| loss(&x, &w, v)) < 1e-4);
}

#[test]
fn conv1d_matches_direct_sum() {
    let (bn, cin, ln, cout) = (2, 3, 4, 2);
    let x = Tensor3 { batch: bn, channels: cin, length: ln, data: rand_vec(bn * cin * ln, 5) };
    let w = rand_vec(cout * cin * 3, 6);
    let b = rand_vec(cout, 7);
    let (y, _) = conv1d_forward(&x, &w, &b, cout);
    for s in 0..bn {
        for o in 0..cout {
            for l in 0..ln {
                let mut v = b[o];
                for c in 0..cin {
                    for k in 0..3 {
                        let li = l as isize + k as isize - 1;
                        if li >= 0 && (li as usize) < ln {
                            v += w[(o * cin + c) * 3 + k] * x.data[x.idx(s, c, li as usize)];
                        }
                    }
                }
                assert!((y.data[y.idx(s, o, l)] - v).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn linear_gradients() {
    let (rows, fi, fo) = (4, 5, 3);
    let x = rand_vec(rows * fi, 8);
    let w = rand_vec(fo * fi, 9);
    let b = rand_vec(fo, 10);
    let r = rand_vec(rows * fo, 11);
    let mut dw = vec![0.0; w.len()];
    let mut db = vec![0.0; fo];
    let dx = linear_backward(&x, rows, &w, &r, fo, &mut dw, &mut db);
    let loss = |x: &[f64], w: &[f64], b: &[f64]| dot(&linear_forward(x, rows, w, b, fo), &r);
    assert!(check_fd(&x, &dx, |v| loss(v, &w, &b)) < 1e-4);
    assert!(check_fd(&w, &dw, |v| loss(&x, v, &b)) < 1e-4);
    assert!(check_fd(&b, &db, |v| loss(&x, &w, v)) < 1e-4);
}

#[test]
fn batchnorm_gradients_and_normalization() {
    let (bn, c, ln) = (4, 3, 5);
    let x = Tensor3 { batch: bn, channels: c, length: ln, data: rand_vec(bn * c * ln, 12).iter().map(|v| 3.0 * v + 1.0).collect() };
    let gamma = rand_vec(c, 13);
    let beta = rand_vec(c, 14);
    let r = rand_vec(x.data.len(), 15);
    let (_, cache) = bn_forward_train(&x, &gamma, &beta, 1e-5);
    let n = bn * ln;
    for ch in 0..c {
        let s = &cache.xhat[ch * n..(ch + 1) * n];
        let m = s.iter().sum::<f64>() / n as f64;
        let v = s.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / n as f64;
        assert!(m.abs() < 1e-5 && (v - 1.0).abs() < 1e-5);
    }
    let dy = Tensor3 { data: r.clone(), ..x.clone() };
    let mut dg = vec![0.0; c];
    let mut dbt = vec![0.0; c];
    let dx = bn_backward(&cache, &gamma, &dy, &mut dg, &mut dbt);
    let loss = |x: &Tensor3, g: &[f64], b: &[f64]| dot(&bn_forward_train(x, g, b, 1e-5).0.data, &r);
    assert!(check_fd(&x.data, &dx.data, |v| loss(&Tensor3 { data: v.to_vec(), ..x.clone() }, &gamma, &beta)) < 1e-4);
    assert!(check_fd(&gamma, &dg, |v| loss(&x, v, &beta)) < 1e-4);
    assert!(check_fd(&beta, &dbt, |v| loss(&x, &gamma, v)) < 1e-4);
}

#[test]
fn relu_and_maxpool_gradients() {
    let x = Tensor3 { batch: 2, channels: 3, length: 7, data: rand_vec(42, 16) };
    let r = rand_vec(2 * 3 * 3, 17);
    let (y, arg) = maxpool_forward(&x);
    assert_eq!(y.length, 3);
    let dy = Tensor3 { data: r.clone(), ..y.clone() };
    let dx = maxpool_backward((2, 3, 7), &arg, &dy);
    assert!((dx.data.iter().sum::<f64>() - r.iter().sum::<f64>()).abs() < 1e-12);
    for (i, &g) in dx.data.iter().enumerate() {
        if !arg.contains(&i) {
            assert_eq!(g, 0.0);
        }
    }
    let loss = |v: &[f64]| dot(&maxpool_forward(&Tensor3 { data: v.to_vec(), ..x.clone() }).0.data, &r);
    assert!(check_fd(&x.data, &dx.data, loss) < 1e-4);

    let xr = rand_vec(20, 18);
    let rr = rand_vec(20, 19);
    let mut y = xr.clone();
    relu_forward(&mut y);
    let mut d = rr.clone();
    relu_backward(&y, &mut d);
    let loss = |v: &[f64]| {
        let mut t = v.to_vec();
        relu_forward(&mut t);
        dot(&t, &rr)
    };
    assert!(check_fd(&xr, &d, loss) < 1e-4);
}

#[test]
fn softmax_cross_entropy_gradients() {
    let (rows, k) = (5, 4);
    let z = rand_vec(rows * k, 20);
    let labels = vec![0, 3, 1, 1, 2];
    let w = vec![1.0, 1.5, 2.0, 1.25, 1.0];
    let (_, dz) = weighted_cross_entropy(&z, k, &labels, &w);
    assert!(check_fd(&z, &dz, |v| weighted_cross_entropy(v, k, &labels, &w).0) < 1e-4);
    let r = rand_vec(rows * k, 21);
    let p = softmax(&z, k);
    for row in p.chunks(k) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    let dz2 = softmax_backward(&p, &r, k);
    assert!(check_fd(&z, &dz2, |v| dot(&softmax(v, k), &r)) < 1e-4);
}

#[test]
fn grl_is_negated_scaling() {
    let dy = rand_vec(10, 22);
    let out = grl_backward(&dy, 0.7);
    for (a, b) in out.iter().zip(&dy) {
        assert_eq!(*a, -0.7 * b);
    }
}

fn batch(c: usize, l: usize, b: usize, seed: u64, shift: f64) -> Tensor3 {
    Tensor3 { batch: b, channels: c, length: l, data: rand_vec(b * c * l, seed).iter().map(|v| v + shift).collect() }
}

/// Full model loss: CE on logits plus a random linear functional of h, and
/// the discriminator path through u = h ⊗ p behind the GRL.
fn model_loss(m: &mut ModelBundle, x: &Tensor3, d: Domain, labels: &[usize], rh: &[f64], lambda: f64) -> (f64, Option<ForwardCache>, Vec<f64>, Vec<f64>) {
    let out = m.forward(x, d, Mode::Train).unwrap();
    let k = m.classes;
    let f = m.feature_dim;
    let b = x.batch;
    let w = vec![1.0; b];
    let (ly, dlog) = weighted_cross_entropy(&out.logits, k, labels, &w);
    let u = kronecker_rows(&out.h, &out.p, b, f, k);
    let dl = m.disc_forward(&u, b);
    let dom_labels = vec![d.index(); b];
    let (ldom, ddl) = weighted_cross_entropy(&dl, 2, &dom_labels, &w);
    // Loss seen by everything upstream of the GRL: L_Y + Σ rh·h − λ L_dom.
    let total = ly + dot(&out.h, rh) - lambda * ldom;
    let _ = ddl;
    (total, Some(out.cache), dlog, out.p)
}

#[test]
fn full_model_gradients_both_branches_and_adapter() {
    let mut m = build_model_adapted((2, 9), (3, 8), 3, 7).unwrap();
    let lambda = 0.8;
    for d in [Domain::Source, Domain::Target] {
        let (c, l) = m.input_shape(d);
        let x = batch(c, l, 4, 30 + d.index() as u64, 0.0);
        let labels = vec![0, 2, 1, 2];
        let rh = rand_vec(4 * m.feature_dim, 31);
        m.zero_grad();
        let out = m.forward(&x, d, Mode::Train).unwrap();
        let (k, f, b) = (m.classes, m.feature_dim, 4);
        let (_, dlog) = weighted_cross_entropy(&out.logits, k, &labels, &[1.0; 4]);
        let u = kronecker_rows(&out.h, &out.p, b, f, k);
        let dl = m.disc_forward(&u, b);
        let (_, ddl) = weighted_cross_entropy(&dl, 2, &vec![d.index(); b], &[1.0; 4]);
        let du = m.disc_backward(&u, b, &ddl);
        let du_rev = grl_backward(&du, lambda);
        let (dh_u, dp_u) = kronecker_backward(&du_rev, &out.h, &out.p, b, f, k);
        let dlog_u = softmax_backward(&out.p, &dp_u, k);
        let dlogits: Vec<f64> = dlog.iter().zip(&dlog_u).map(|(a, b)| a + b).collect();
        let dh: Vec<f64> = rh.iter().zip(&dh_u).map(|(a, b)| a + b).collect();
        m.backward(out.cache, &dh, &dlogits).unwrap();
        let names: Vec<String> = m.store.params.iter().map(|p| p.name.clone()).collect();
        for (pi, name) in names.iter().enumerate() {
            let on_path = match d {
                Domain::Source => !name.contains(".t."),
                Domain::Target => !name.contains(".s."),
            };
            let analytic = m.store.params[pi].grad.clone();
            if name.starts_with("disc") {
                continue;
            }
            if !on_path {
                assert!(analytic.iter().all(|&g| g == 0.0), "{name} touched by {d:?}");
                continue;
            }
            let len = analytic.len();
            let idxs: Vec<usize> = if len <= 12 { (0..len).collect() } else { (0..12).map(|j| (j * 7919) % len).collect() };
            for &i in &idxs {
                let orig = m.store.params[pi].value[i];
                m.store.params[pi].value[i] = orig + STEP;
                let up = model_loss(&mut m, &x, d, &labels, &rh, lambda).0;
                m.store.params[pi].value[i] = orig - STEP;
                let dn = model_loss(&mut m, &x, d, &labels, &rh, lambda).0;
                m.store.params[pi].value[i] = orig;
                let fd = (up - dn) / (2.0 * STEP);
                assert!(rel_err(analytic[i], fd) < 1e-4, "{name}[{i}] {d:?}: {} vs {fd}", analytic[i]);
            }
        }
    }
}

#[test]
fn discriminator_gradients() {
    let mut m = build_model(8, 2, 3, 9).unwrap();
    let rows = 5;
    let u = rand_vec(rows * m.feature_dim * 3, 40);
    let labels = vec![0, 1, 1, 0, 1];
    let w = vec![1.25, 2.0, 1.5, 1.0, 1.75];
    m.zero_grad();
    let (_, dz) = weighted_cross_entropy(&m.disc_forward(&u, rows), 2, &labels, &w);
    let du = m.disc_backward(&u, rows, &dz);
    let mut m2 = m.clone();
    assert!(check_fd(&u, &du, |v| weighted_cross_entropy(&m2.disc_forward(v, rows), 2, &labels, &w).0) < 1e-4);
    let wid = m.disc.w;
    let analytic = m.store.grad(wid).to_vec();
    let w0 = m.store.value(wid).to_vec();
    assert!(check_fd(&w0, &analytic, |v| {
        m2.store.value_mut(wid).copy_from_slice(v);
        weighted_cross_entropy(&m2.disc_forward(&u, rows), 2, &labels, &w).0
    }) < 1e-4);
}

/// Independent count: conv (out·in·3 + out), two BN branches (2·out each),
/// then fc1, classifier, discriminator and an optional dense adapter.
fn param_count_oracle(src: (usize, usize), tgt: (usize, usize), k: usize) -> usize {
    let (c, l) = tgt;
    let a = 2 * (c + 1);
    let chans = [c, a, 2 * a, 4 * a, 4 * a, 8 * a];
    let mut total = 0;
    for i in 0..5 {
        total += chans[i + 1] * chans[i] * 3 + chans[i + 1] + 2 * 2 * chans[i + 1];
    }
    let flat = 8 * a * (l / 8);
    let f = 2 * a;
    total += f * flat + f + k * f + k + 2 * f * k + 2;
    if src != tgt {
        total += src.0 * src.1 * c * l + c * l;
    }
    total
}

#[test]
fn architecture_shapes_and_counts() {
    let m = build_model(14, 15, 4, 1).unwrap();
    assert_eq!(m.feature_dim, 64);
    assert_eq!(architecture(15, 14).1, 1);
    assert_eq!(m.disc.fan_in, 256);
    let m2 = build_model(11, 60, 4, 1).unwrap();
    assert_eq!(m2.feature_dim, 244);
    assert_eq!(architecture(60, 11).1, 1);
    for (src, tgt, k) in [((15, 14), (15, 14), 4), ((60, 11), (60, 11), 3), ((45, 5), (45, 13), 2)] {
        let m = build_model_adapted(src, tgt, k, 3).unwrap();
        assert_eq!(m.store.count(false), param_count_oracle(src, tgt, k));
    }
    assert!(build_model(7, 15, 4, 1).is_err());
}

#[test]
fn eval_is_deterministic_and_normalized() {
    let mut m = build_model(8, 3, 4, 2).unwrap();
    let x = batch(3, 8, 5, 50, 0.0);
    let a = m.predict(&x, Domain::Target).unwrap();
    let b = m.predict(&x, Domain::Target).unwrap();
    assert_eq!(a, b);
    for row in a.chunks(4) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }
    let cw = m.cls.w;
    m.store.value_mut(cw).fill(0.0);
    let p = m.predict(&x, Domain::Source).unwrap();
    assert!(p.iter().all(|&v| (v - 0.25).abs() < 1e-15));
}

#[test]
fn train_mode_errors() {
    let mut m = build_model(8, 3, 2, 2).unwrap();
    assert_eq!(m.forward(&batch(3, 8, 1, 1, 0.0), Domain::Source, Mode::Train).err(), Some(TensorError::BatchTooSmall));
    assert!(matches!(m.forward(&batch(2, 8, 3, 1, 0.0), Domain::Source, Mode::Eval), Err(TensorError::ShapeMismatch { .. })));
    let out = m.forward(&batch(3, 8, 3, 1, 0.0), Domain::Source, Mode::Train).unwrap();
    m.adam_step(&AdamConfig::new(1e-3));
    let dh = vec![0.0; 3 * m.feature_dim];
    let dl = vec![0.0; 6];
    assert_eq!(m.backward(out.cache, &dh, &dl), Err(TensorError::StaleCache));
}

#[test]
fn adam_scalar_oracle() {
    let mut s = ParamStore::default();
    let id = s.add("p", vec![3], vec![1.0, -2.0, 0.5], true);
    let cfg = AdamConfig::new(0.01);
    s.adam_step(&cfg);
    assert_eq!(s.value(id), &[1.0, -2.0, 0.5]);
    s.t = 0;
    let g = [0.3, -2.0, 1e-3];
    s.grad_mut(id).copy_from_slice(&g);
    let before = s.value(id).to_vec();
    s.params[0].m.fill(0.0);
    s.params[0].v.fill(0.0);
    s.adam_step(&cfg);
    for i in 0..3 {
        // m̂ = g, v̂ = g², so Δ = −η·g/(|g| + ε).
        let want = before[i] - 0.01 * g[i] / (g[i].abs() + 1e-8);
        assert!((s.value(id)[i] - want).abs() < 1e-15);
    }
    for _ in 0..500 {
        let prev = s.value(id).to_vec();
        s.adam_step(&cfg);
        let step: Vec<f64> = s.value(id).iter().zip(&prev).map(|(a, b)| a - b).collect();
        for i in 0..3 {
            assert!((step[i] + 0.01 * g[i].signum()).abs() < 1e-6);
        }
    }
}

#[test]
fn dsbn_branch_isolation() {
    // One input channel with conv1 reduced to its centre tap: BN1 sees the
    // raw input, so its running mean tracks the data mean.
    let mut m = build_model(8, 1, 2, 5).unwrap();
    let w = m.convs[0].w;
    let cout = m.convs[0].cout;
    let wv = m.store.value_mut(w);
    wv.fill(0.0);
    for o in 0..cout {
        wv[o * 3 + 1] = 1.0;
    }
    for step in 0..100 {
        m.forward(&batch(1, 8, 6, 100 + step, 5.0), Domain::Source, Mode::Train).unwrap();
    }
    let (tm, tv) = m.dsbn_stats(Domain::Target)[0];
    assert!(tm.iter().all(|&v| v == 0.0) && tv.iter().all(|&v| v == 1.0));
    for step in 0..100 {
        m.forward(&batch(1, 8, 6, 300 + step, 0.0), Domain::Target, Mode::Train).unwrap();
    }
    let (sm, _) = m.dsbn_stats(Domain::Source)[0];
    let (tm, _) = m.dsbn_stats(Domain::Target)[0];
    assert!(sm.iter().all(|&v| v > 4.0), "{sm:?}");
    assert!(tm.iter().all(|&v| v.abs() < 1.0), "{tm:?}");
    let x = batch(1, 8, 3, 400, 2.0);
    assert_ne!(m.predict(&x, Domain::Source).unwrap(), m.predict(&x, Domain::Target).unwrap());
}

#[test]
fn training_is_deterministic() {
    let run = || {
        let mut m = build_model(8, 2, 2, 11).unwrap();
        for s in 0..5 {
            m.zero_grad();
            let x = batch(2, 8, 4, s, 0.0);
            let out = m.forward(&x, Domain::Source, Mode::Train).unwrap();
            let (_, dl) = weighted_cross_entropy(&out.logits, 2, &[0, 1, 1, 0], &[1.0; 4]);
            let dh = vec![0.0; out.h.len()];
            m.backward(out.cache, &dh, &dl).unwrap();
            m.adam_step(&AdamConfig::new(1e-3));
        }
        m
    };
    assert_eq!(run(), run());
}

proptest! {
    #[test]
    fn grl_exact(v in prop::collection::vec(-1e3f64..1e3, 1..50), lambda in 0.0f64..3.0) {
        let out = grl_backward(&v, lambda);
        for (a, b) in out.iter().zip(&v) {
            prop_assert_eq!(*a, -lambda * b);
        }
    }

    #[test]
    fn maxpool_conserves_gradient(seed in any::<u64>(), len in 2usize..12) {
        let x = Tensor3 { batch: 2, channels: 2, length: len, data: rand_vec(4 * len, seed) };
        let (y, arg) = maxpool_forward(&x);
        let dy = Tensor3 { data: rand_vec(y.data.len(), seed ^ 5), ..y };
        let dx = maxpool_backward((2, 2, len), &arg, &dy);
        prop_assert!((dx.data.iter().sum::<f64>() - dy.data.iter().sum::<f64>()).abs() < 1e-10);
    }

    #[test]
    fn bn_train_output_standardized(seed in any::<u64>(), scale in 0.1f64..10.0) {
        let x = Tensor3 { batch: 4, channels: 2, length: 3, data: rand_vec(24, seed).iter().map(|v| v * scale + 2.0).collect() };
        let (y, _) = bn_forward_train(&x, &[1.0, 1.0], &[0.0, 0.0], 0.0);
        for c in 0..2 {
            let s = &y.data[c * 12..(c + 1) * 12];
            let m = s.iter().sum::<f64>() / 12.0;
            let v = s.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / 12.0;
            prop_assert!(m.abs() < 1e-5);
            prop_assert!((v - 1.0).abs() < 1e-5);
        }
    }
}
