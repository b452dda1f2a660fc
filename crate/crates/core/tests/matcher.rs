use shredmap::groundtruth::GroundTruthSet;
use shredmap::imagecore::{crop, RasterImage, RectRegion, RED};
use shredmap::matcher::{annotate, match_piece, match_pieces, MatchConfig, BOX_THICKNESS};
use shredmap::rectfit::TemplateChoice;
use shredmap::synth::synthetic_note;

fn two_faces(w: usize, h: usize) -> GroundTruthSet<f64> {
    GroundTruthSet::from_images(
        vec![
            ("alpha".to_string(), synthetic_note(w, h, 101).unwrap()),
            ("beta".to_string(), synthetic_note(w, h, 202).unwrap()),
        ],
        1,
    )
    .unwrap()
}

fn planted(set: &GroundTruthSet<f64>, id: &str, degrees: u32, x: usize, y: usize, size: usize) -> TemplateChoice {
    let view = set.rotated_view(id, degrees).unwrap();
    let tpl = crop(&view.image, RectRegion::new(x, y, size, size)).unwrap();
    TemplateChoice::from_template(format!("{id}@{degrees}"), tpl)
}

#[test]
fn planted_self_match_at_rotation_zero() {
    let set = two_faces(240, 120);
    let choice = planted(&set, "beta", 0, 50, 70, 40);
    let cfg = MatchConfig {
        rotation_step: 10,
        ..MatchConfig::default()
    };
    let top = &match_piece(&set, &choice, &cfg).unwrap()[0];
    assert_eq!((top.ground_truth_id.as_str(), top.rotation, top.x, top.y), ("beta", 0, 50, 70));
    assert!((top.match_value - 1.0).abs() < 1e-6);
    assert!((top.unrotated_center_x - 69.5).abs() < 1e-9 && (top.unrotated_center_y - 89.5).abs() < 1e-9);
}

#[test]
fn result_serializes_with_expected_fields() {
    let set = two_faces(160, 80);
    let choice = planted(&set, "alpha", 0, 10, 12, 36);
    let cfg = MatchConfig {
        rotation_step: 90,
        ..MatchConfig::default()
    };
    let top = &match_piece(&set, &choice, &cfg).unwrap()[0];
    let v: serde_json::Value = serde_json::to_value(top).unwrap();
    for key in ["match_value", "x", "y", "rotation", "ground_truth_id", "piece_id"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn pyramid_agrees_with_exhaustive_on_planted_crops() {
    let set = two_faces(320, 160);
    let choices: Vec<_> = [(0u32, 40, 30), (37, 120, 90), (133, 60, 100), (290, 150, 40), (359, 200, 60), (181, 90, 20)]
        .iter()
        .enumerate()
        .map(|(k, &(deg, x, y))| planted(&set, if k % 2 == 0 { "alpha" } else { "beta" }, deg, x, y, 64))
        .collect();
    let exhaustive = MatchConfig::default();
    let pyramid = MatchConfig {
        pyramid_levels: 3,
        ..MatchConfig::default()
    };
    let a = match_pieces(&set, &choices, &exhaustive).unwrap();
    let b = match_pieces(&set, &choices, &pyramid).unwrap();
    for (ra, rb) in a.iter().zip(&b) {
        let (ra, rb) = (&ra[0], &rb[0]);
        assert!(ra.match_value >= 0.999, "{ra:?}");
        assert_eq!(ra.ground_truth_id, rb.ground_truth_id);
        let d = (ra.unrotated_center_x - rb.unrotated_center_x).hypot(ra.unrotated_center_y - rb.unrotated_center_y);
        assert!(d <= 1.0, "{ra:?} vs {rb:?}");
        assert!((ra.match_value - rb.match_value).abs() < 1e-9);
    }
}

#[test]
fn larger_top_k_keeps_the_winner() {
    let set = two_faces(200, 100);
    let choice = planted(&set, "alpha", 20, 60, 40, 40);
    for levels in [1, 2] {
        let base = MatchConfig {
            rotation_step: 5,
            pyramid_levels: levels,
            ..MatchConfig::default()
        };
        let one = match_piece(&set, &choice, &base).unwrap();
        let many = match_piece(&set, &choice, &MatchConfig { top_k: 5, ..base.clone() }).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(many.len(), 5);
        assert_eq!(one[0], many[0]);
        assert!(many.windows(2).all(|w| w[0].match_value >= w[1].match_value));
        assert!(many.iter().all(|r| (-1.0..=1.0).contains(&r.match_value)));
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let set = two_faces(200, 100);
    let choices: Vec<_> = (0..3).map(|k| planted(&set, "beta", 30 * k, 40 + 10 * k as usize, 30, 40)).collect();
    let cfg = MatchConfig {
        rotation_step: 3,
        top_k: 3,
        ..MatchConfig::default()
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| match_pieces(&set, &choices, &cfg).unwrap())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn undersized_and_oversized_templates_error() {
    let set = two_faces(100, 60);
    let small = TemplateChoice::from_template("s", RasterImage::filled(20, 20, [9, 9, 9]).unwrap());
    let err = match_piece(&set, &small, &MatchConfig::default()).unwrap_err();
    assert!(err.to_string().contains("template too small"), "{err}");

    let big = TemplateChoice::from_template("b", synthetic_note(150, 150, 1).unwrap());
    let err = match_piece(&set, &big, &MatchConfig { rotation_step: 90, ..MatchConfig::default() }).unwrap_err();
    assert!(err.to_string().contains("template exceeds view"), "{err}");

    let misaligned = GroundTruthSet::<f64>::from_images(vec![("g".into(), synthetic_note(100, 60, 1).unwrap())], 4).unwrap();
    let choice = TemplateChoice::from_template("t", synthetic_note(40, 40, 2).unwrap());
    assert!(match_piece(&misaligned, &choice, &MatchConfig { rotation_step: 6, ..MatchConfig::default() }).is_err());
}

#[test]
fn annotation_encloses_the_planted_crop() {
    let set = two_faces(200, 100);
    let choice = planted(&set, "alpha", 0, 70, 30, 40);
    let cfg = MatchConfig {
        rotation_step: 90,
        ..MatchConfig::default()
    };
    let top = &match_piece(&set, &choice, &cfg).unwrap()[0];
    let face = &set.entry("alpha").unwrap().image;
    let out = annotate(face, top, (40, 40), RED).unwrap();
    let red: Vec<(usize, usize)> = (0..100)
        .flat_map(|y| (0..200).map(move |x| (x, y)))
        .filter(|&(x, y)| out.get(x, y) != face.get(x, y))
        .collect();
    let (min_x, max_x) = (red.iter().map(|p| p.0).min().unwrap(), red.iter().map(|p| p.0).max().unwrap());
    let (min_y, max_y) = (red.iter().map(|p| p.1).min().unwrap(), red.iter().map(|p| p.1).max().unwrap());
    assert_eq!((min_x, min_y), (70 - BOX_THICKNESS, 30 - BOX_THICKNESS));
    assert_eq!((max_x, max_y), (70 + 40 + BOX_THICKNESS - 1, 30 + 40 + BOX_THICKNESS - 1));
    for y in 30..70 {
        for x in 70..110 {
            assert_eq!(out.get(x, y), face.get(x, y));
        }
    }
}
