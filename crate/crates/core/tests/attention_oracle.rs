use dar_core::attention::{
    attention_logits, attention_weights, cross_attention, cross_attention_fuse,
    multi_head_attention, self_attention_block, spda, AttentionParams, HeadProjection,
};
use dar_core::loss::{combined_loss, pixel_cross_entropy, LogitGrid, LossWeights};
use dar_core::mask::LabelMap;
use dar_core::tensor::{FeatureSeq, Matrix};
use dar_oracle::{FixtureRng, OracleHead, Rows};

fn seq(rng: &mut FixtureRng, n: usize, d: usize) -> FeatureSeq {
    FeatureSeq::from_rows(&rng.rows(n, d)).unwrap()
}

fn rows(s: &FeatureSeq) -> Rows {
    s.as_matrix().to_rows()
}

fn oracle_heads(p: &AttentionParams) -> Vec<OracleHead> {
    p.heads()
        .iter()
        .map(|h| OracleHead {
            wq: h.w_q.to_rows(),
            wk: h.w_k.to_rows(),
            wv: h.w_v.to_rows(),
        })
        .collect()
}

fn oracle_mha(q: &Rows, k: &Rows, v: &Rows, p: &AttentionParams) -> Rows {
    dar_oracle::multi_head(q, k, v, &oracle_heads(p), &p.w_o().to_rows())
}

fn assert_close(a: &Rows, b: &Rows, tol: f64) {
    assert_eq!(a.len(), b.len());
    for (ra, rb) in a.iter().zip(b) {
        assert_eq!(ra.len(), rb.len());
        for (x, y) in ra.iter().zip(rb) {
            assert!((x - y).abs() < tol, "{x} vs {y}");
        }
    }
}

fn permute(s: &FeatureSeq, perm: &[usize]) -> FeatureSeq {
    FeatureSeq::from_rows(&perm.iter().map(|&i| s.row(i).to_vec()).collect::<Vec<_>>()).unwrap()
}

#[test]
fn spda_matches_double_loop_oracle() {
    let mut rng = FixtureRng::new(31);
    let q = seq(&mut rng, 2, 4);
    let k = seq(&mut rng, 3, 4);
    let v = seq(&mut rng, 3, 4);
    let p = AttentionParams::seeded(1, 4, 4, 12).unwrap();
    let h = &p.heads()[0];
    let out = spda(&q, &k, &v, h).unwrap();
    let o = dar_oracle::spda(
        &rows(&q),
        &rows(&k),
        &rows(&v),
        &h.w_q.to_rows(),
        &h.w_k.to_rows(),
        &h.w_v.to_rows(),
    );
    assert_close(&rows(&out), &o, 1e-9);
}

#[test]
fn spda_oracle_sweep() {
    let mut rng = FixtureRng::new(5);
    for n in 1..=8 {
        for d in [1, 3, 8] {
            for dk in [1, 2, d] {
                let q = seq(&mut rng, n, d);
                let k = seq(&mut rng, 9 - n, d);
                let v = seq(&mut rng, 9 - n, d);
                let p = AttentionParams::seeded(1, d, dk, rng.next_u64()).unwrap();
                let h = &p.heads()[0];
                let out = spda(&q, &k, &v, h).unwrap();
                let o = dar_oracle::spda(
                    &rows(&q),
                    &rows(&k),
                    &rows(&v),
                    &h.w_q.to_rows(),
                    &h.w_k.to_rows(),
                    &h.w_v.to_rows(),
                );
                assert_close(&rows(&out), &o, 1e-9);
                let w = attention_weights(&q, &k, h).unwrap();
                for i in 0..w.rows() {
                    assert!((w.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-6);
                }
            }
        }
    }
}

#[test]
fn multi_head_matches_per_head_oracle() {
    let mut rng = FixtureRng::new(8);
    let x = seq(&mut rng, 3, 4);
    let p = AttentionParams::seeded(2, 4, 2, 77).unwrap();
    let out = multi_head_attention(&x, &x, &x, &p).unwrap();
    assert_eq!((out.len(), out.dim()), (3, 4));
    assert_close(
        &rows(&out),
        &oracle_mha(&rows(&x), &rows(&x), &rows(&x), &p),
        1e-9,
    );
}

#[test]
fn softmax_shift_invariance() {
    // Adding a constant to every logit of a row leaves the weights unchanged.
    let mut rng = FixtureRng::new(3);
    let q = seq(&mut rng, 4, 3);
    let k = seq(&mut rng, 5, 3);
    let logits = attention_logits(&q, &k, &HeadProjection::identity(3)).unwrap();
    let shifted = Matrix::from_fn(4, 5, |i, j| logits.get(i, j) + 3.0 * i as f64 - 11.0);
    let a = dar_core::attention::softmax_rows(&logits);
    let b = dar_core::attention::softmax_rows(&shifted);
    for (x, y) in a.data().iter().zip(b.data()) {
        assert!((x - y).abs() < 1e-9);
    }
}

#[test]
fn key_value_joint_permutation_invariance() {
    let mut rng = FixtureRng::new(21);
    let q = seq(&mut rng, 4, 5);
    let k = seq(&mut rng, 6, 5);
    let v = seq(&mut rng, 6, 5);
    let p = AttentionParams::seeded(3, 5, 2, 4).unwrap();
    let perm = [4, 2, 0, 5, 1, 3];
    let base = multi_head_attention(&q, &k, &v, &p).unwrap();
    let moved = multi_head_attention(&q, &permute(&k, &perm), &permute(&v, &perm), &p).unwrap();
    assert_close(&rows(&base), &rows(&moved), 1e-9);
}

#[test]
fn doubling_head_dim_rescales_logits_by_sqrt2() {
    let mut rng = FixtureRng::new(1);
    let q = seq(&mut rng, 3, 4);
    let k = seq(&mut rng, 5, 4);
    let narrow = AttentionParams::seeded(1, 4, 2, 6).unwrap().heads()[0].clone();
    // Pad with zero columns: raw dot products stay the same, only d_k doubles.
    let pad = |m: &Matrix| Matrix::from_fn(4, 4, |i, j| if j < 2 { m.get(i, j) } else { 0.0 });
    let wide = HeadProjection::new(pad(&narrow.w_q), pad(&narrow.w_k), pad(&narrow.w_v)).unwrap();
    let ln = attention_logits(&q, &k, &narrow).unwrap();
    let lw = attention_logits(&q, &k, &wide).unwrap();
    for (a, b) in ln.data().iter().zip(lw.data()) {
        assert!((a - b * 2f64.sqrt()).abs() <= 1e-15 * a.abs().max(1.0));
    }
}

#[test]
fn self_attention_uniform_rule() {
    // Identical positions attend uniformly, so each output row is the mean
    // of the projected values, here the input row itself.
    let x = FeatureSeq::from_rows(&vec![vec![0.25, -1.5, 2.0]; 5]).unwrap();
    let p = AttentionParams::new(vec![HeadProjection::identity(3)], Matrix::identity(3)).unwrap();
    let out = self_attention_block(&x, &[p]).unwrap();
    assert_close(&rows(&out), &rows(&x), 1e-15);
}

#[test]
fn self_attention_is_permutation_equivariant() {
    let mut rng = FixtureRng::new(44);
    let x = seq(&mut rng, 6, 4);
    let layers = [
        AttentionParams::seeded(2, 4, 2, 1).unwrap(),
        AttentionParams::seeded(4, 4, 1, 2).unwrap(),
    ];
    let perm = [3, 0, 5, 1, 4, 2];
    let out = self_attention_block(&x, &layers).unwrap();
    let out_perm = self_attention_block(&permute(&x, &perm), &layers).unwrap();
    assert_close(&rows(&permute(&out, &perm)), &rows(&out_perm), 1e-9);
}

#[test]
fn self_attention_two_layers_match_composition() {
    let mut rng = FixtureRng::new(60);
    let x = seq(&mut rng, 6, 4);
    let layers = [
        AttentionParams::seeded(2, 4, 2, 10).unwrap(),
        AttentionParams::seeded(2, 4, 2, 11).unwrap(),
    ];
    let out = self_attention_block(&x, &layers).unwrap();
    let l1 = oracle_mha(&rows(&x), &rows(&x), &rows(&x), &layers[0]);
    let l2 = oracle_mha(&l1, &l1, &l1, &layers[1]);
    assert_close(&rows(&out), &l2, 1e-9);
}

#[test]
fn cross_attention_fuse_matches_composition() {
    let mut rng = FixtureRng::new(61);
    let f_e = seq(&mut rng, 4, 4);
    let f_s = seq(&mut rng, 6, 4);
    let f_int = seq(&mut rng, 4, 4);
    let layers = [
        AttentionParams::seeded(2, 4, 2, 20).unwrap(),
        AttentionParams::seeded(2, 4, 2, 21).unwrap(),
    ];
    let out = cross_attention_fuse(&f_e, &f_s, &f_int, &layers).unwrap();
    let s = rows(&f_s);
    let c1 = oracle_mha(&rows(&f_e), &s, &s, &layers[0]);
    let c2 = oracle_mha(&c1, &s, &s, &layers[1]);
    let expected: Rows = c2
        .iter()
        .zip(rows(&f_int))
        .map(|(a, b)| a.iter().zip(&b).map(|(x, y)| x + y).collect())
        .collect();
    assert_close(&rows(&out), &expected, 1e-9);
    assert_close(
        &rows(&cross_attention(&f_e, &f_s, &layers).unwrap()),
        &c2,
        1e-9,
    );
}

#[test]
fn runs_are_bit_reproducible() {
    let run = || {
        let mut rng = FixtureRng::new(99);
        let f_e = seq(&mut rng, 5, 4);
        let f_ad = seq(&mut rng, 7, 4);
        let sa = [AttentionParams::seeded(2, 4, 2, 1).unwrap()];
        let ca = [AttentionParams::seeded(2, 4, 2, 2).unwrap()];
        let f_s = self_attention_block(&f_ad, &sa).unwrap();
        cross_attention_fuse(&f_e, &f_s, &f_e, &ca).unwrap()
    };
    let (a, b) = (run(), run());
    let bits = |s: &FeatureSeq| {
        s.as_matrix()
            .data()
            .iter()
            .map(|v| v.to_bits())
            .collect::<Vec<_>>()
    };
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn cross_entropy_matches_oracle() {
    let mut rng = FixtureRng::new(12);
    let data: Vec<f64> = (0..4 * 4 * 3).map(|_| rng.uniform(-3.0, 3.0)).collect();
    let gt: Vec<u32> = (0..16).map(|_| rng.below(3) as u32).collect();
    let logits = LogitGrid::new(4, 4, 3, data.clone()).unwrap();
    let map = LabelMap::new(4, 4, 3, gt.clone()).unwrap();
    let ce = pixel_cross_entropy(&logits, &map).unwrap();
    let per_pos: Vec<Vec<f64>> = data.chunks(3).map(<[f64]>::to_vec).collect();
    assert!((ce - dar_oracle::cross_entropy(&per_pos, &gt)).abs() < 1e-9);
    assert!(ce >= 0.0 && ce.is_finite());
}

#[test]
fn cross_entropy_decreases_with_true_logit() {
    let gt = LabelMap::filled(1, 1, 4, 2).unwrap();
    let mut last = f64::INFINITY;
    for step in 0..40 {
        let mut g = LogitGrid::new(1, 1, 4, vec![0.5, -1.0, 0.0, 2.0]).unwrap();
        g.set(0, 0, 2, -5.0 + step as f64 * 0.5);
        let l = pixel_cross_entropy(&g, &gt).unwrap();
        assert!(l < last);
        last = l;
    }
}

#[test]
fn combined_loss_is_bilinear() {
    let cases = [
        (0.3, 1.7, 0.25, 4.0),
        (2.0, 0.0, 1.5, 0.5),
        (0.125, 0.5, 8.0, 0.75),
    ];
    for (a, b, l1, l2) in cases {
        let w = LossWeights::new(a, b).unwrap();
        let base = combined_loss(l1, l2, &w);
        assert_eq!(base, a * l1 + b * l2);
        // Powers of two scale exactly.
        assert_eq!(
            combined_loss(l1, l2, &LossWeights::new(2.0 * a, 2.0 * b).unwrap()),
            2.0 * base
        );
        assert_eq!(combined_loss(4.0 * l1, 4.0 * l2, &w), 4.0 * base);
        assert_eq!(
            combined_loss(l1, l2, &LossWeights::new(a, 0.0).unwrap())
                + combined_loss(l1, l2, &LossWeights::new(0.0, b).unwrap()),
            base
        );
    }
}
