use mdsad_core::features::fft_magnitude;
use mdsad_core::force::{gen_abnormal, gen_normal, AbnormalGenConfig, ForceSignal, SignalGenConfig};
use mdsad_core::pseudo::{cut_paste, mixup_force, MixupConfig, NngPool};
use mdsad_core::scene::{render_arc_patch, render_scene, Ambient};
use mdsad_core::Label;
use proptest::prelude::*;

fn normal(seed: u64) -> ForceSignal {
    gen_normal(&SignalGenConfig::default(), seed)
}

fn abnormal(seed: u64) -> ForceSignal {
    gen_abnormal(&SignalGenConfig::default(), &AbnormalGenConfig::default(), seed)
}

/// λ with out = λ·a + (1−λ)·n, if such a λ reproduces every sample.
fn fitted_lambda(out: &[f64], a: &[f64], n: &[f64]) -> Option<f64> {
    let t = (0..a.len()).max_by(|&i, &j| (a[i] - n[i]).abs().total_cmp(&(a[j] - n[j]).abs()))?;
    let lambda = (out[t] - n[t]) / (a[t] - n[t]);
    let fits = (0..a.len()).all(|i| (lambda * a[i] + (1.0 - lambda) * n[i] - out[i]).abs() < 1e-9);
    fits.then_some(lambda)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn signals_are_well_formed(seed in any::<u64>()) {
        let n = normal(seed);
        prop_assert!(n.check().is_ok());
        prop_assert_eq!(n.label, Label::Normal);
        prop_assert_eq!(&n, &normal(seed));
        let a = abnormal(seed);
        prop_assert!(a.check().is_ok());
        prop_assert_eq!(a.label, Label::Abnormal);
        prop_assert!(!a.events.is_empty());
        prop_assert!(a.events.iter().all(|e| e.start + e.len <= 500));
    }

    #[test]
    fn scenes_and_patches_stay_in_range(seed in any::<u64>(), day in any::<bool>()) {
        let img = render_scene(seed, if day { Ambient::Day } else { Ambient::Night });
        prop_assert!(img.pixels.iter().all(|p| (0.0..=1.0).contains(p)));
        let p = render_arc_patch(seed);
        prop_assert!(p.width <= 16 && p.height <= 16);
        prop_assert!(p.pixels.iter().cloned().fold(0.0, f64::max) >= 0.9);
        for (v, m) in p.pixels.iter().zip(&p.mask) {
            prop_assert!((0.0..=1.0).contains(m));
            prop_assert!(*m == 0.0 || *v > 0.2);
        }
    }

    #[test]
    fn cut_paste_is_local(seed in any::<u64>(), patch_seed in any::<u64>(), day in any::<bool>()) {
        let base = render_scene(seed, if day { Ambient::Day } else { Ambient::Night });
        let out = cut_paste(&base, &render_arc_patch(patch_seed), seed ^ 0x55).unwrap();
        prop_assert_eq!(out.label, Label::Abnormal);
        let r = out.arc_region.unwrap();
        for y in 0..base.height {
            for x in 0..base.width {
                if !r.contains(x, y) {
                    prop_assert_eq!(out.at(x, y), base.at(x, y));
                } else {
                    prop_assert!(out.at(x, y) >= base.at(x, y) - 1e-15);
                }
            }
        }
        let (cx, cy) = r.center();
        let (px, py) = base.contact_point;
        prop_assert!((cx as i64 - px as i64).abs() <= 4 && (cy as i64 - py as i64).abs() <= 4);
    }

    #[test]
    fn mixup_is_an_anomaly_dominant_convex_combination(a_seed in any::<u64>(), n_seed in any::<u64>(), seed in any::<u64>()) {
        let (a, n) = (abnormal(a_seed), normal(n_seed));
        let out = mixup_force(&a, &n, &MixupConfig::default(), seed).unwrap();
        for t in 0..500 {
            prop_assert!(out.values[t] >= a.values[t].min(n.values[t]) - 1e-12);
            prop_assert!(out.values[t] <= a.values[t].max(n.values[t]) + 1e-12);
        }
        let lambda = fitted_lambda(&out.values, &a.values, &n.values).unwrap();
        prop_assert!((0.5 - 1e-9..=1.0 + 1e-9).contains(&lambda));
        prop_assert_eq!(&out.events, &a.events);
        prop_assert_eq!(out.label, Label::Abnormal);
    }

    #[test]
    fn nng_picks_among_the_nearest(pool_seed in 0u64..1_000_000, a_seed in any::<u64>(), seed in any::<u64>()) {
        let pool: Vec<ForceSignal> = (0..10).map(|i| normal(pool_seed * 10 + i)).collect();
        let a = abnormal(a_seed);
        let q = fft_magnitude(&a.values).unwrap().bins;
        let mut dist: Vec<(f64, usize)> = pool
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let f = fft_magnitude(&s.values).unwrap().bins;
                (q.iter().zip(&f).map(|(x, y)| (x - y) * (x - y)).sum::<f64>(), i)
            })
            .collect();
        dist.sort_by(|x, y| x.0.total_cmp(&y.0));
        let oracle: Vec<usize> = dist[..3].iter().map(|d| d.1).collect();

        let nng = NngPool::new(&pool).unwrap();
        let mut near = nng.neighbours(&a, 3).unwrap();
        near.sort();
        let mut want = oracle.clone();
        want.sort();
        prop_assert_eq!(near, want);

        let out = nng.mix(&a, 3, &MixupConfig::default(), seed).unwrap();
        let partner = (0..10).find(|&i| fitted_lambda(&out.values, &a.values, &pool[i].values).is_some());
        prop_assert!(partner.is_some_and(|p| oracle.contains(&p)));
    }
}
