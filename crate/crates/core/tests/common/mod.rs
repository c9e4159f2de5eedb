pub mod oracle;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tvgroup::{Panel, UnitSeries};

/// Random small panel: `n` units, up to `t` periods (some units with gaps),
/// `p` regressors, the first an intercept when `intercept` is set.
pub fn random_panel(rng: &mut ChaCha8Rng, n: usize, t: usize, p: usize, intercept: bool) -> Panel {
    let units = (0..n)
        .map(|i| {
            let mut times: Vec<usize> = (1..=t).collect();
            if rng.random::<f64>() < 0.3 {
                times.remove(rng.random_range(0..t));
            }
            let len = times.len();
            let x = DMatrix::from_fn(len, p, |_, c| {
                if intercept && c == 0 {
                    1.0
                } else {
                    rng.sample::<f64, _>(StandardNormal)
                }
            });
            let shift = (i % 2) as f64 * 2.0;
            let y = (0..len)
                .map(|r| {
                    let v = times[r] as f64 / t as f64;
                    shift * v + x.row(r).sum() * v + rng.sample::<f64, _>(StandardNormal)
                })
                .collect();
            UnitSeries {
                id: format!("u{i}"),
                times,
                y,
                x,
            }
        })
        .collect();
    Panel::new(units, Some(t)).unwrap()
}
