use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vog::nn::{Model, ModelSpec, Params};
use vog::Tensor;

pub const EPS: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;
pub const ABS_FLOOR: f64 = 1e-8;

pub fn close(analytic: f64, numeric: f64) -> bool {
    (analytic - numeric).abs() <= (REL_TOL * analytic.abs().max(numeric.abs())).max(ABS_FLOOR)
}

pub fn random_mlp(rng: &mut ChaCha8Rng) -> ModelSpec {
    let shape = [
        rng.random_range(1..=2),
        rng.random_range(1..=4),
        rng.random_range(1..=4),
    ];
    let hidden: Vec<usize> = (0..rng.random_range(1..=2))
        .map(|_| rng.random_range(2..=6))
        .collect();
    ModelSpec::mlp(shape, &hidden, rng.random_range(2..=5))
}

pub fn random_convnet(rng: &mut ChaCha8Rng) -> ModelSpec {
    let c = rng.random_range(1..=3);
    let h = rng.random_range(3..=6);
    let w = rng.random_range(3..=6);
    let k = rng.random_range(1..=3);
    ModelSpec::small_convnet(
        [c, h, w],
        rng.random_range(1..=3),
        k,
        rng.random_range(2..=5),
        rng.random_range(2..=4),
    )
}

pub fn randomize(params: &mut Params, rng: &mut ChaCha8Rng) {
    for t in params.tensors_mut() {
        for v in t.data_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
    }
}

pub fn random_input(spec: &ModelSpec, rng: &mut ChaCha8Rng) -> Tensor {
    let n: usize = spec.input_shape.iter().product();
    Tensor::new(
        spec.input_shape.to_vec(),
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

pub fn loss_at(model: &Model, x: &Tensor, y: usize) -> f64 {
    let logits = model.forward(x).unwrap();
    let z = logits.data();
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    lse - z[y]
}

/// Central difference, or `None` when a ReLU kink lies inside `[-eps, eps]`
/// (the one-sided slopes then disagree at order one).
pub fn central_difference(f: impl Fn(f64) -> f64, x0: f64) -> Option<f64> {
    let (lo, mid, hi) = (f(x0 - EPS), f(x0), f(x0 + EPS));
    let (left, right) = ((mid - lo) / EPS, (hi - mid) / EPS);
    let central = (hi - lo) / (2.0 * EPS);
    if (left - right).abs() > 1e-3 * (1.0 + central.abs()) {
        None
    } else {
        Some(central)
    }
}

#[derive(Default)]
pub struct Tally {
    pub checked: usize,
    pub skipped: usize,
    pub mismatches: Vec<String>,
    pub max_rel_err: f64,
}

impl Tally {
    fn record(&mut self, analytic: f64, numeric: f64, what: impl FnOnce() -> String) {
        self.checked += 1;
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(ABS_FLOOR);
        self.max_rel_err = self.max_rel_err.max(rel);
        if !close(analytic, numeric) {
            self.mismatches.push(format!("{}: analytic {analytic} vs numeric {numeric}", what()));
        }
    }
}

pub fn check_instance(spec: ModelSpec, rng: &mut ChaCha8Rng, tally: &mut Tally) {
    let mut params = Params::init(&spec, rng.random()).unwrap();
    randomize(&mut params, rng);
    let model = Model::new(spec.clone(), params.clone()).unwrap();
    let x = random_input(&spec, rng);
    let y = rng.random_range(0..spec.num_classes);

    let (_, grads) = model.loss_and_grad(&x, y).unwrap();
    let analytic: Vec<f64> = grads.tensors().flat_map(|t| t.data().to_vec()).collect();
    let total = analytic.len();
    for (k, &g) in analytic.iter().enumerate() {
        let perturbed = |delta: f64| {
            let mut p = params.clone();
            let mut idx = k;
            for t in p.tensors_mut() {
                if idx < t.len() {
                    t.data_mut()[idx] += delta;
                    break;
                }
                idx -= t.len();
            }
            loss_at(&Model::new(spec.clone(), p).unwrap(), &x, y)
        };
        match central_difference(perturbed, 0.0) {
            Some(num) => tally.record(g, num, || format!("param {k}/{total} of {spec:?}")),
            None => tally.skipped += 1,
        }
    }

    let p = rng.random_range(0..spec.num_classes);
    let gx = model.input_gradient(&x, p).unwrap();
    assert_eq!(gx.shape(), x.shape());
    for i in 0..x.len() {
        let logit = |delta: f64| {
            let mut xp = x.clone();
            xp.data_mut()[i] += delta;
            model.forward(&xp).unwrap().data()[p]
        };
        match central_difference(logit, 0.0) {
            Some(num) => tally.record(gx.data()[i], num, || format!("input {i} of {spec:?}")),
            None => tally.skipped += 1,
        }
    }
}

/// Checks 25 random MLPs and 25 random convnets, alternating.
pub fn fifty_instances(seed: u64) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::default();
    for i in 0..50 {
        let spec = if i % 2 == 0 {
            random_mlp(&mut rng)
        } else {
            random_convnet(&mut rng)
        };
        check_instance(spec, &mut rng, &mut tally);
    }
    tally
}
