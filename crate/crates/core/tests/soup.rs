use loopsoup::brownian::q_n;
use loopsoup::lattice_walk::qtilde;
use loopsoup::soup::{
    brownian_soup, build_field, loop_duration, mismatch_probability, phi_n, psi_n, root_offset, rw_soup,
    small_loop_mass, theorem1_report, total_site_rate, ReportOptions, SoupOptions, Window,
};
use loopsoup::stats::{chi_square_gof, poisson_pmf};
use loopsoup::{Complex64, LatticePoint, LoopIndex, SoupKind, SoupRealization};
use proptest::prelude::*;
use std::collections::BTreeSet;

fn window(h: i64) -> Window {
    Window::centered(h).unwrap()
}

#[test]
fn mean_count_of_unit_loops() {
    // 101² ≈ 10⁴ cells
    let f = build_field(window(50), 4, 10.0, 1).unwrap();
    let total: u64 = f.window().sites().map(|z| f.count(1, z, 10.0).unwrap()).sum();
    let mean = total as f64 / f.window().site_count() as f64;
    let want = 10.0 * q_n(1);
    assert!((want - 1.567).abs() < 1e-3);
    assert!((mean / want - 1.0).abs() < 0.02, "{mean} vs {want}");
}

#[test]
fn counts_are_poisson() {
    for (n, lambda) in [(1u64, 5.0), (3, 20.0)] {
        let f = build_field(window(70), n, lambda, 2 + n).unwrap();
        let pmf = poisson_pmf(lambda * q_n(n), 12);
        let mut obs = vec![0u64; pmf.len()];
        for z in f.window().sites() {
            let k = f.count(n, z, lambda).unwrap() as usize;
            obs[k.min(pmf.len() - 1)] += 1;
        }
        let gof = chi_square_gof(&obs, &pmf);
        assert!(gof.p_value > 0.001, "n={n}: {gof:?}");
    }
}

#[test]
fn walk_counts_never_exceed_brownian_counts() {
    let f = build_field(window(20), 50, 30.0, 3).unwrap();
    for (_, _, big, small) in f.cells(30.0).unwrap() {
        assert!(small <= big);
    }
}

#[test]
fn mismatch_rate_within_bound() {
    let (n, lambda) = (5u64, 100.0);
    let f = build_field(window(158), n, lambda, 4).unwrap();
    let cells = f.window().site_count() as f64;
    let bad =
        f.window().sites().filter(|&z| f.count(n, z, lambda).unwrap() != f.count_tilde(n, z, lambda).unwrap()).count()
            as f64;
    let x = lambda * (q_n(n) - qtilde(n));
    let rate = bad / cells;
    assert!(rate <= x + 3.0 * (x * (1.0 - x) / cells).sqrt(), "{rate} vs {x}");
}

#[test]
fn zero_intensity() {
    let f = build_field(window(5), 64, 1.0, 5).unwrap();
    let opts = SoupOptions { include_small: true, ..SoupOptions::default() };
    assert!(rw_soup(&f, 0.0, 4, &opts).unwrap().loops.is_empty());
    assert!(brownian_soup(&f, 0.0, 4, &opts).unwrap().loops.is_empty());
    let rep =
        theorem1_report(&build_field(window(10), 64, 1.0, 5).unwrap(), 0.0, 8, 1.0, 1.0, &ReportOptions::default())
            .unwrap();
    assert!(rep.bijective && rep.pairs.is_empty() && rep.unmatched.is_empty());
}

#[test]
fn walk_soup_size() {
    let (lambda, n_max) = (2.0, 16u64);
    let f = build_field(window(50), n_max, lambda, 6).unwrap();
    let opts = SoupOptions::default();
    let soup = rw_soup(&f, lambda, 1, &opts).unwrap();
    let want = lambda * f.window().site_count() as f64 * (1..=n_max).map(qtilde).sum::<f64>();
    let got = soup.loops.len() as f64;
    assert!((got / want - 1.0).abs() < 0.02, "{got} vs {want}");
}

#[test]
fn brownian_density_matches_telescoped_mass() {
    // the whole tail is counted, realized or not
    let f = build_field(window(150), 1 << 40, 1.0, 7).unwrap();
    let loops: u64 = f.cells(1.0).unwrap().iter().map(|c| c.2).sum();
    let density = loops as f64 / f.window().site_count() as f64;
    let want = 4.0 / (5.0 * std::f64::consts::PI);
    assert!((want - 0.2546).abs() < 1e-4 && (total_site_rate() - want).abs() < 1e-15);
    assert!((density / want - 1.0).abs() < 0.02, "{density} vs {want}");
}

#[test]
fn coupled_durations_in_bucket() {
    let f = build_field(window(6), 64, 3.0, 8).unwrap();
    let soup = brownian_soup(&f, 3.0, 1, &SoupOptions::default()).unwrap();
    assert!(!soup.loops.is_empty());
    for l in &soup.loops {
        let n = l.index.n as f64;
        let t = l.path.duration();
        assert!(t >= n - 0.375 && t <= n + 0.625, "{t} for n = {n}");
        assert_eq!(t, loop_duration(f.seed(), l.index));
    }
}

#[test]
fn walk_and_brownian_index_sets() {
    let lambda = 4.0;
    let f = build_field(window(8), 32, lambda, 9).unwrap();
    let opts = SoupOptions::default();
    let ids = |s: &SoupRealization| s.loops.iter().map(|l| l.index).collect::<BTreeSet<_>>();
    let walk = ids(&rw_soup(&f, lambda, 2, &opts).unwrap());
    let brown = ids(&brownian_soup(&f, lambda, 2, &opts).unwrap());
    assert!(walk.is_subset(&brown));
    let bad: BTreeSet<(u64, LatticePoint)> =
        f.cells(lambda).unwrap().into_iter().filter(|c| c.2 != c.3 && c.0 <= 32).map(|c| (c.0, c.1)).collect();
    for i in brown.difference(&walk) {
        assert!(bad.contains(&(i.n, i.z)));
    }
}

#[test]
fn roots_lie_in_their_cells() {
    let f = build_field(window(6), 16, 2.0, 10).unwrap();
    let soup = brownian_soup(&f, 2.0, 1, &SoupOptions::default()).unwrap();
    for l in &soup.loops {
        let z = Complex64::new(l.index.z.x as f64, l.index.z.y as f64);
        let off = l.path.root() - z;
        assert!(off.re.abs() < 0.5 && off.im.abs() < 0.5);
        assert!((off - root_offset(f.seed(), l.index)).norm() < 1e-12);
        assert_eq!(psi_n(l.path.root(), 1), z);
    }
}

#[test]
fn json_round_trip() {
    let f = build_field(window(4), 16, 2.0, 11).unwrap();
    let opts = SoupOptions { include_small: true, ..SoupOptions::default() };
    for soup in [rw_soup(&f, 2.0, 3, &opts).unwrap(), brownian_soup(&f, 2.0, 3, &opts).unwrap()] {
        let text = soup.to_json().unwrap();
        let back = SoupRealization::from_json(&text).unwrap();
        assert_eq!(back, soup);
        assert_eq!(back.to_json().unwrap(), text);
    }
}

#[test]
fn json_rejects_bad_input() {
    let f = build_field(window(2), 8, 1.0, 12).unwrap();
    let text = rw_soup(&f, 1.0, 1, &SoupOptions::default()).unwrap().to_json().unwrap();
    let wrong = text.replacen("\"schemaVersion\":1", "\"schemaVersion\":9", 1);
    assert!(SoupRealization::from_json(&wrong).is_err());
    assert!(SoupRealization::from_json("{\"schemaVersion\":1}").is_err());
    assert!(SoupRealization::from_json(&text[..text.len() / 2]).is_err());
}

#[test]
fn small_layer_is_uncoupled() {
    let f = build_field(window(3), 8, 5.0, 13).unwrap();
    let opts = SoupOptions { include_small: true, t_min: 0.2, ..SoupOptions::default() };
    let soup = brownian_soup(&f, 5.0, 1, &opts).unwrap();
    let small: Vec<_> = soup.loops.iter().filter(|l| !l.coupled).collect();
    assert!(!small.is_empty());
    for l in small {
        assert_eq!(l.index.n, 0);
        assert!(l.path.duration() >= 0.2 && l.path.duration() < 0.625);
    }
    assert_eq!(soup.kind, SoupKind::Brownian);
    let bad = SoupOptions { t_min: 0.7, ..opts };
    assert!(brownian_soup(&f, 5.0, 1, &bad).is_err());
}

#[test]
fn report_gaps_and_validation() {
    let f = build_field(Window::covering_disk(16.0).unwrap(), 1 << 10, 1.0, 14).unwrap();
    let rep = theorem1_report(&f, 1.0, 16, 1.0, 1.0, &ReportOptions::default()).unwrap();
    assert!(rep.max_duration_gap <= 0.625 / 256.0);
    for p in &rep.pairs {
        assert!(p.duration_gap <= 0.625 / 256.0);
        assert!(p.index.n > 16);
    }
    assert!(theorem1_report(&f, 1.0, 16, 1.0, 0.5, &ReportOptions::default()).is_err());
    assert!(theorem1_report(&f, 1.0, 16, 1.0, 2.0, &ReportOptions::default()).is_err());
    assert!(theorem1_report(&f, 1.0, 32, 1.0, 1.0, &ReportOptions::default()).is_err());
    let p = mismatch_probability(1.0, 16, 1.0, 1.0, 1 << 20);
    assert!(p > 0.0 && p < 0.01);
}

#[test]
fn small_loop_mass_values() {
    let inf = small_loop_mass(0.625, f64::INFINITY, 1.0).unwrap();
    assert!((inf - total_site_rate()).abs() < 1e-15);
    assert_eq!(small_loop_mass(0.3, 0.3, 1.0).unwrap(), 0.0);
    let whole = small_loop_mass(0.1, 0.9, 2.0).unwrap();
    let parts = small_loop_mass(0.1, 0.4, 2.0).unwrap() + small_loop_mass(0.4, 0.9, 2.0).unwrap();
    assert!((whole - parts).abs() < 1e-12);
}

proptest! {
    #[test]
    fn soups_grow_with_intensity(seed in 0u64..1000, a in 0.0f64..3.0, b in 0.0f64..3.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let f = build_field(window(3), 32, 3.0, seed).unwrap();
        let opts = SoupOptions::default();
        for kind in [SoupKind::Walk, SoupKind::Brownian] {
            let get = |l: f64| {
                let s = match kind {
                    SoupKind::Walk => rw_soup(&f, l, 1, &opts).unwrap(),
                    SoupKind::Brownian => brownian_soup(&f, l, 1, &opts).unwrap(),
                };
                s.loops.into_iter().map(|l| (l.index, l.path)).collect::<Vec<_>>()
            };
            let small = get(lo);
            let big = get(hi);
            for item in &small {
                prop_assert!(big.contains(item));
            }
        }
    }

    #[test]
    fn phi_buckets(t in 0.01f64..50.0, scale in 1u32..64) {
        let n2 = (scale as f64).powi(2);
        prop_assume!(t >= 0.625 / n2);
        let k = phi_n(t, scale).unwrap() * n2;
        prop_assert!((k - k.round()).abs() < 1e-9);
        prop_assert!(k - 0.375 <= t * n2 + 1e-9 && t * n2 < k + 0.625 + 1e-9);
    }

    #[test]
    fn psi_fixes_scaled_lattice(x in -100i64..100, y in -100i64..100, scale in 1u32..64) {
        let p = Complex64::new(x as f64, y as f64) / scale as f64;
        prop_assert_eq!(psi_n(p, scale), p);
    }

    #[test]
    fn loop_index_keys_are_stable(seed in any::<u64>(), n in 1u64..1000, x in -50i64..50, m in 1u64..5) {
        let i = LoopIndex { n, z: LatticePoint::new(x, -x), m };
        prop_assert_eq!(loop_duration(seed, i), loop_duration(seed, i));
        prop_assert_eq!(root_offset(seed, i), root_offset(seed, i));
    }
}
