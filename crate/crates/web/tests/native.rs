use irsa_web::{curve, simulate, two_user, MAX_FRAMES};

#[test]
fn slotted_aloha_curve() {
    let pts = curve("1", 0.5, 1.5, 0.5).unwrap();
    assert_eq!(pts.len(), 6);
    for pair in pts.chunks(2) {
        let g = pair[0];
        assert!((pair[1] - g * (-g).exp()).abs() < 1e-9);
    }
}

#[test]
fn bad_inputs_are_reported() {
    assert!(curve("a,b", 0.1, 1.0, 0.1).is_err());
    assert!(curve("1", 1.0, 0.1, 0.1).is_err());
    assert!(two_user(0).is_err());
    assert!(simulate(5, 4, "1", 1.0, MAX_FRAMES + 1, 0).is_err());
}

#[test]
fn two_user_four_slots() {
    let v = two_user(4).unwrap();
    let expected = [4.0 / 15.0, 6.0 / 15.0, 4.0 / 15.0, 1.0 / 15.0, 28.0 / 60.0];
    for (a, b) in v.iter().zip(expected) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn simulation_is_seeded() {
    let a = simulate(5, 4, "1", 1.0, 20_000, 3).unwrap();
    assert_eq!(a, simulate(5, 4, "1", 1.0, 20_000, 3).unwrap());
    assert!((a[0] - 0.4096).abs() < 4.0 * a[2] + 1e-3);
}
