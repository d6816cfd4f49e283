use super::*;

fn m(rows: usize, cols: usize, data: &[f64]) -> Tensor {
    Tensor::matrix(rows, cols, data.to_vec()).unwrap()
}

#[test]
fn tensor_rejects_bad_lengths() {
    assert!(matches!(
        Tensor::new(vec![2, 3], vec![0.0; 5]),
        Err(NumericsError::DataLength { .. })
    ));
    assert!(matches!(
        Tensor::new(vec![2, 0], vec![]),
        Err(NumericsError::ZeroExtent { .. })
    ));
}

#[test]
fn matmul_identity_and_hand_example() {
    let tape = Tape::new();
    let eye = tape.constant(m(2, 2, &[1.0, 0.0, 0.0, 1.0]));
    let mm = tape.constant(m(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
    let out = eye.matmul(mm).unwrap().value();
    assert_eq!(out, mm.value());

    let a = tape.constant(m(2, 2, &[1.0, 2.0, 3.0, 4.0]));
    let b = tape.constant(m(2, 1, &[0.0, 1.0]));
    assert_eq!(a.matmul(b).unwrap().value().data(), &[2.0, 4.0]);
}

#[test]
fn matmul_shape_error_names_both_shapes() {
    let tape = Tape::new();
    let a = tape.constant(Tensor::zeros(&[2, 3]).unwrap());
    let b = tape.constant(Tensor::zeros(&[2, 3]).unwrap());
    let err = a.matmul(b).unwrap_err();
    assert_eq!(
        err,
        NumericsError::Dimension {
            op: "matmul",
            left: vec![2, 3],
            right: vec![2, 3]
        }
    );
    assert!(err.to_string().contains("[2, 3] vs [2, 3]"));
}

#[test]
fn gradient_of_sum_of_product_is_broadcast_column_sums() {
    let tape = Tape::new();
    let a = tape.leaf(m(2, 3, &[0.5, -1.0, 2.0, 1.5, 0.0, 3.0]));
    let b = tape.constant(m(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
    let loss = a.matmul(b).unwrap().sum();
    let grads = tape.backward(loss).unwrap();
    // d/dA_ij sum(AB) = sum_k B_jk
    assert_eq!(grads.wrt(a).unwrap().data(), &[3.0, 7.0, 11.0, 3.0, 7.0, 11.0]);
}

#[test]
fn softmax_examples() {
    let tape = Tape::new();
    let x = tape.constant(Tensor::vector(vec![0.0, 0.0, 0.0]).unwrap());
    for v in x.softmax(None).unwrap().value().data() {
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }
    let x = tape.constant(Tensor::vector(vec![1.0, 2.0, 3.0]).unwrap());
    let y = x.softmax(None).unwrap().value();
    for (got, want) in y.data().iter().zip([0.09003, 0.24473, 0.66524]) {
        assert!((got - want).abs() < 1e-5, "{got} vs {want}");
    }
    let x = tape.constant(Tensor::vector(vec![5.0, 9.0]).unwrap());
    let y = x.softmax(Some(&[true, false])).unwrap().value();
    assert_eq!(y.data(), &[1.0, 0.0]);
}

#[test]
fn softmax_rejects_fully_masked_rows() {
    let tape = Tape::new();
    let x = tape.constant(Tensor::vector(vec![1.0, 2.0]).unwrap());
    assert_eq!(
        x.softmax(Some(&[false, false])).unwrap_err(),
        NumericsError::DegenerateMask
    );
}

#[test]
fn softmax_is_stable_for_large_inputs() {
    let tape = Tape::new();
    let x = tape.constant(Tensor::vector(vec![1000.0, 1000.0, -1000.0]).unwrap());
    let y = x.softmax(None).unwrap().value();
    assert_eq!(y.data(), &[0.5, 0.5, 0.0]);
}

#[test]
fn elementwise_fixed_points() {
    let tape = Tape::new();
    let x = tape.leaf(Tensor::vector(vec![0.0]).unwrap());
    let s = x.sigmoid();
    assert_eq!(s.value().data(), &[0.5]);
    assert_eq!(x.tanh().value().data(), &[0.0]);
    let grads = tape.backward(s.sum()).unwrap();
    assert_eq!(grads.wrt(x).unwrap().data(), &[0.25]);
}

#[test]
fn broadcasting_is_limited_to_bias_rows() {
    let tape = Tape::new();
    let a = tape.constant(Tensor::zeros(&[2, 3]).unwrap());
    let row = tape.constant(Tensor::vector(vec![1.0, 2.0, 3.0]).unwrap());
    let row2 = tape.constant(Tensor::matrix(1, 3, vec![1.0, 2.0, 3.0]).unwrap());
    let col = tape.constant(Tensor::matrix(2, 1, vec![1.0, 2.0]).unwrap());
    assert_eq!(a.add(row).unwrap().value().data(), &[1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
    assert!(a.add(row2).is_ok());
    assert!(matches!(a.add(col), Err(NumericsError::Dimension { .. })));
    assert!(matches!(row.add(a), Err(NumericsError::Dimension { .. })));
}

#[test]
fn layer_norm_examples() {
    let tape = Tape::new();
    let gain = tape.constant(Tensor::filled(&[4], 1.0).unwrap());
    let bias = tape.constant(Tensor::zeros(&[4]).unwrap());
    let x = tape.constant(m(1, 4, &[1.0, 1.0, 1.0, 1.0]));
    assert_eq!(x.layer_norm(gain, bias).unwrap().value().data(), &[0.0; 4]);

    let gain = tape.constant(Tensor::filled(&[2], 1.0).unwrap());
    let bias = tape.constant(Tensor::zeros(&[2]).unwrap());
    let x = tape.constant(m(1, 2, &[1.0, -1.0]));
    let y = x.layer_norm(gain, bias).unwrap().value();
    assert!((y.data()[0] - 1.0).abs() < 1e-4);
    assert!((y.data()[1] + 1.0).abs() < 1e-4);
}

#[test]
fn layer_norm_requires_width_two() {
    let tape = Tape::new();
    let gain = tape.constant(Tensor::filled(&[1], 1.0).unwrap());
    let bias = tape.constant(Tensor::zeros(&[1]).unwrap());
    let x = tape.constant(m(2, 1, &[1.0, 2.0]));
    assert!(matches!(x.layer_norm(gain, bias), Err(NumericsError::Rank { .. })));
}

#[test]
fn backward_examples() {
    let tape = Tape::new();
    let x = tape.leaf(Tensor::vector(vec![1.0, 2.0, 3.0]).unwrap());
    let g = tape.backward(x.sum()).unwrap();
    assert_eq!(g.wrt(x).unwrap().data(), &[1.0, 1.0, 1.0]);

    let tape = Tape::new();
    let x = tape.leaf(Tensor::vector(vec![1.0, 2.0]).unwrap());
    let g = tape.backward(x.mul(x).unwrap().sum()).unwrap();
    assert_eq!(g.wrt(x).unwrap().data(), &[2.0, 4.0]);
}

#[test]
fn backward_rejects_non_scalar_and_reuse() {
    let tape = Tape::new();
    let x = tape.leaf(Tensor::vector(vec![1.0, 2.0]).unwrap());
    assert!(matches!(tape.backward(x), Err(NumericsError::Rank { .. })));
    let loss = x.sum();
    tape.backward(loss).unwrap();
    assert_eq!(tape.backward(loss).unwrap_err(), NumericsError::TapeConsumed);
}

#[test]
fn unused_leaf_gets_zero_gradient_and_constants_get_none() {
    let tape = Tape::new();
    let x = tape.leaf(Tensor::vector(vec![1.0, 2.0]).unwrap());
    let unused = tape.leaf(Tensor::vector(vec![5.0]).unwrap());
    let c = tape.constant(Tensor::vector(vec![3.0, 4.0]).unwrap());
    let g = tape.backward(x.mul(c).unwrap().sum()).unwrap();
    assert_eq!(g.wrt(unused).unwrap().data(), &[0.0]);
    assert!(g.wrt(c).is_none());
}

#[test]
fn gather_checks_range_and_scatters_gradient() {
    let tape = Tape::new();
    let table = tape.leaf(m(3, 2, &[0.0, 0.0, 1.0, 2.0, 3.0, 4.0]));
    assert!(matches!(
        table.gather_rows(&[3]),
        Err(NumericsError::Index { index: 3, bound: 3 })
    ));
    let rows = table.gather_rows(&[2, 2, 1]).unwrap();
    assert_eq!(rows.value().data(), &[3.0, 4.0, 3.0, 4.0, 1.0, 2.0]);
    let g = tape.backward(rows.sum()).unwrap();
    assert_eq!(g.wrt(table).unwrap().data(), &[0.0, 0.0, 1.0, 1.0, 2.0, 2.0]);
}

#[test]
fn ops_are_bitwise_deterministic() {
    let run = || {
        let tape = Tape::new();
        let a = tape.leaf(m(2, 3, &[0.1, 0.7, -0.3, 1.1, 0.2, -2.0]));
        let b = tape.leaf(m(3, 2, &[0.3, -0.2, 0.9, 0.05, -1.3, 0.4]));
        let y = a.matmul(b).unwrap().tanh().softmax(None).unwrap();
        let loss = y.mul(y).unwrap().sum();
        let g = tape.backward(loss).unwrap();
        (loss.value(), g.wrt(a).unwrap().clone(), g.wrt(b).unwrap().clone())
    };
    let (l1, a1, b1) = run();
    let (l2, a2, b2) = run();
    assert!(l1.bitwise_eq(&l2) && a1.bitwise_eq(&a2) && b1.bitwise_eq(&b2));
}
