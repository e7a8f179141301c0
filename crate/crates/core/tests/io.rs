mod common;

use merw::io::*;
use merw::multiparticle::FockBasis;
use merw::walk::merw;
use merw::{dominant_eigenpair, EigenOptions, Error, GraphKind, WeightedGraph};
use proptest::prelude::*;

#[test]
fn graph_file_round_trips() {
    for (seed, kind) in [(1, GraphKind::Simple), (2, GraphKind::MultiEdge), (3, GraphKind::Weighted)] {
        let g = common::random_digraph(seed, 9, 14, kind);
        let text = graph_to_string(&g);
        assert!(text.starts_with(&format!("merw-graph v1 n=9 kind={}\n", kind.name())));
        let back = parse_graph(&text).unwrap();
        assert_eq!(back.kind(), kind);
        assert_eq!(back.edges(), g.edges());
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.txt");
    let g = common::chain_with_loop();
    write_graph(&path, &g).unwrap();
    assert_eq!(read_graph(&path).unwrap().edges(), g.edges());
}

#[test]
fn graph_parse_errors_carry_positions() {
    let cases = [
        ("", 1, 1),
        ("merw-graph v2 n=3 kind=simple\n", 1, 1),
        ("merw-graph v1 n=3 kind=fancy\n", 1, 19),
        ("merw-graph v1 n=3 kind=simple\n0 1 1\n0 7 1\n", 3, 3),
        ("merw-graph v1 n=3 kind=simple\n# c\n0 1\n", 3, 1),
        ("merw-graph v1 n=3 kind=weighted\n0 1 abc\n", 2, 5),
    ];
    for (text, line, column) in cases {
        match parse_graph(text) {
            Err(Error::Parse { line: l, column: c, .. }) => assert_eq!((l, c), (line, column), "{text:?}"),
            other => panic!("{text:?}: {other:?}"),
        }
    }
    assert!(matches!(parse_graph("merw-graph v1 n=2 kind=simple\n0 1 2\n"), Err(Error::KindViolation { .. })));
}

proptest! {
    #[test]
    fn weights_round_trip_bit_exactly(ws in proptest::collection::vec(0.0f64..1e6, 1..20)) {
        let n = ws.len();
        let edges: Vec<_> = ws.iter().enumerate().map(|(i, &w)| (i, (i + 1) % n, w)).collect();
        let g = WeightedGraph::new(n, GraphKind::Weighted, &edges).unwrap();
        let back = parse_graph(&graph_to_string(&g)).unwrap();
        for ((_, _, a), (_, _, b)) in g.edges().into_iter().zip(back.edges()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn seventeen_digits_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
        let s = fmt17(x);
        prop_assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
        let digits = s.split('e').next().unwrap().chars().filter(|c| c.is_ascii_digit()).count();
        prop_assert_eq!(digits, 17);
    }
}

#[test]
fn csv_tables_round_trip() {
    let g = common::random_digraph(5, 6, 8, GraphKind::Weighted);
    let pair = dominant_eigenpair(&g, &EigenOptions::default()).unwrap();
    let t = eigenpair_table(&pair);
    assert_eq!(t.header, ["vertex", "psi", "phi", "pi"]);
    let back = Table::from_csv(&t.to_csv().unwrap()).unwrap();
    assert_eq!(back, t);
    assert_eq!(back.numeric("psi").unwrap(), pair.psi);

    let s = merw(&g).unwrap();
    let tr = transition_table(&s);
    assert_eq!(tr.header, ["i", "j", "s_ij"]);
    assert_eq!(tr.rows.len(), s.matrix.nnz());
    assert_eq!(stationary_table(&s.stationary).header, ["vertex", "pi"]);
    assert_eq!(metric_table(&[("a", 1.0)]).rows[0], ["a", "1.0000000000000000e0"]);

    let f = field_table(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 3);
    assert_eq!(f.header, ["x", "y", "value"]);
    assert_eq!(f.rows[4][..2], ["1", "1"]);
    assert_eq!(field_table(&[1.0], 0).header, ["x", "value"]);
    assert!(Table::from_csv("a,b\n1\n").is_err());
}

#[test]
fn fock_dump_format() {
    let b = FockBasis::new(3, 2, &[2]).unwrap();
    let amps: Vec<f64> = (0..b.len()).map(|i| 0.1 * i as f64).collect();
    let t = fock_table(&b, 0, &amps);
    assert_eq!(t.header, ["occupation_vector", "amplitude", "probability"]);
    assert_eq!(t.rows[0][0], "2;0;0");
    let p = t.numeric("probability").unwrap();
    assert!((p[3] - 0.09).abs() < 1e-15);
    assert!(t.to_csv().unwrap().contains("0;1;1"));
}

#[test]
fn pgm_scales_to_sixteen_bits() {
    let v: Vec<f64> = (0..12).map(|i| i as f64).collect();
    let img = parse_pgm(&pgm(4, 3, &v, Scale::Linear).unwrap()).unwrap();
    assert_eq!((img.width, img.height, img.maxval), (4, 3, 65535));
    assert_eq!(img.pixels[0], 0);
    assert_eq!(img.pixels[11], 65535);
    assert!(img.pixels.windows(2).all(|w| w[0] < w[1]));

    let log = parse_pgm(&pgm(3, 1, &[1e-6, 1e-3, 1.0], Scale::Log).unwrap()).unwrap();
    assert_eq!(log.pixels, [0, 32768, 65535]);
    let flat = parse_pgm(&pgm(2, 1, &[0.0, 0.0], Scale::Log).unwrap()).unwrap();
    assert_eq!(flat.pixels, [0, 0]);
    assert!(pgm(3, 3, &v, Scale::Linear).is_err());
    assert!(parse_pgm("P5\n1 1\n255\n0").is_err());
}

#[test]
fn svg_plot_structure() {
    let pts: Vec<(f64, f64)> = (0..50).map(|i| (i as f64, (-(i as f64) / 5.0).exp())).collect();
    let svg = LinePlot::new("profile", "x", "pi").log_y(true).series("merw", pts.clone()).series("a<b", vec![(0.0, 0.0), (1.0, -1.0)]).to_svg();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<polyline").count(), 1);
    assert!(svg.contains("a&lt;b"));
    let lin = LinePlot::new("", "", "").series("s", pts).to_svg();
    assert!(lin.contains("<polyline"));
    assert_eq!(svg, LinePlot::new("profile", "x", "pi").log_y(true).series("merw", (0..50).map(|i| (i as f64, (-(i as f64) / 5.0).exp())).collect()).series("a<b", vec![(0.0, 0.0), (1.0, -1.0)]).to_svg());
}

#[test]
fn atomic_write_replaces() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.json");
    write_atomic(&p, b"one").unwrap();
    write_atomic(&p, b"two").unwrap();
    assert_eq!(std::fs::read(&p).unwrap(), b"two");
    assert!(!dir.path().join("m.tmp").exists());
}
