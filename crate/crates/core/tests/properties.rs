use ndarray::Array2;
use pathgan::gridworld::{
    deviation_score, load_map, read_path_frame, synthesize_trajectory, validate_path_frame,
    GridError, GridMap, PathClass, PathFrame,
};
use pathgan::neuralcore::Activation;
use proptest::prelude::*;

fn grid() -> impl Strategy<Value = (usize, usize, Vec<bool>)> {
    (1usize..=10, 1usize..=10).prop_flat_map(|(r, c)| {
        (
            Just(r),
            Just(c),
            proptest::collection::vec(prop::bool::weighted(0.7), r * c),
        )
    })
}

fn map_of(r: usize, c: usize, mut cells: Vec<bool>) -> GridMap {
    cells[0] = true;
    GridMap::new(r, c, cells).unwrap()
}

/// All-pairs shortest 4-adjacent distances over public cells.
fn floyd_warshall(map: &GridMap) -> Vec<Vec<Option<usize>>> {
    let (r, c) = map.shape();
    let n = r * c;
    let mut d = vec![vec![None; n]; n];
    for a in 0..n {
        let (i, j) = (a / c, a % c);
        if !map.is_public((i, j)) {
            continue;
        }
        d[a][a] = Some(0);
        let near = [(i + 1, j), (i, j + 1)];
        for (y, x) in near {
            if y < r && x < c && map.is_public((y, x)) {
                let b = y * c + x;
                d[a][b] = Some(1);
                d[b][a] = Some(1);
            }
        }
    }
    for k in 0..n {
        for a in 0..n {
            let Some(ak) = d[a][k] else { continue };
            for b in 0..n {
                if let Some(kb) = d[k][b] {
                    if d[a][b].is_none_or(|ab| ak + kb < ab) {
                        d[a][b] = Some(ak + kb);
                    }
                }
            }
        }
    }
    d
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn deviation_bounds((r, c, cells) in grid(), path in proptest::collection::vec(any::<bool>(), 100)) {
        let map = map_of(r, c, cells);
        let frame = PathFrame::from_cells(r, c, path[..r * c].to_vec()).unwrap();
        let d = deviation_score(&frame, &map).unwrap();
        let off = frame.set_cells().filter(|&x| !map.is_public(x)).count();
        prop_assert!(d >= 0.0);
        prop_assert!(d <= frame.count() as f64 / map.public_count() as f64 + 1e-12);
        prop_assert_eq!(d == 0.0, off == 0);
        prop_assert!((d - off as f64 / map.public_count() as f64).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip((r, c, cells) in grid(), path in proptest::collection::vec(any::<bool>(), 100)) {
        let map = map_of(r, c, cells);
        let mut buf = Vec::new();
        map.write_csv(&mut buf).unwrap();
        prop_assert_eq!(&load_map(&buf[..]).unwrap(), &map);
        let frame = PathFrame::from_cells(r, c, path[..r * c].to_vec()).unwrap();
        let text = frame.to_csv_string();
        prop_assert_eq!(read_path_frame(text.as_bytes(), (r, c)).unwrap(), frame);
    }

    #[test]
    fn softmax_rows_sum_to_one(v in proptest::collection::vec(-30.0f64..30.0, 12)) {
        let x = Array2::from_shape_vec((3, 4), v).unwrap();
        let p = Activation::Softmax.apply(x.view());
        for row in p.rows() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-6);
            prop_assert!(row.iter().all(|&q| q > 0.0));
        }
    }

    #[test]
    fn argmax_invariant_to_positive_scaling(
        v in proptest::collection::vec(-10.0f64..10.0, 6),
        scale in 0.05f64..20.0,
    ) {
        let argmax = |a: &Array2<f64>| {
            let row = a.row(0);
            (0..row.len()).fold(0, |b, k| if row[k] > row[b] { k } else { b })
        };
        let x = Array2::from_shape_vec((1, 6), v).unwrap();
        let p = Activation::Softmax.apply(x.view());
        let q = Activation::Softmax.apply(x.mapv(|t| t * scale).view());
        prop_assert_eq!(argmax(&p), argmax(&x));
        prop_assert_eq!(argmax(&q), argmax(&x));
    }

    #[test]
    fn synthesis_length_is_shortest_distance(
        (r, c, cells) in grid(),
        a in 0usize..100,
        b in 0usize..100,
        seed in any::<u64>(),
    ) {
        let map = map_of(r, c, cells);
        let (s, t) = (a % (r * c), b % (r * c));
        let (src, dst) = ((s / c, s % c), (t / c, t % c));
        prop_assume!(map.is_public(src) && map.is_public(dst));
        let spec = PathClass { id: 0, source: src, destination: dst };
        let dist = floyd_warshall(&map)[s][t];
        match synthesize_trajectory(&map, &spec, seed, 0.0) {
            Ok(frame) => {
                prop_assert_eq!(Some(frame.count() - 1), dist);
                prop_assert!(validate_path_frame(&frame, &map, &spec).unwrap().is_valid());
            }
            Err(GridError::Unreachable { .. }) => prop_assert_eq!(dist, None),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }
}
