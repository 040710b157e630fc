use kdfsum::batch::{generate, FuzzCase};
use kdfsum::exact_arith::{poch, vandermonde_2f1};
use kdfsum::identities::{
    build_lhs, build_rhs, describe, random_instance, verify, IdentityForm, IdentityId, IdentityInstance, Reading,
    Status,
};
use kdfsum::kdf_core::{expand, shift_spec, KdfSpec, Shape, SlotBinding};
use kdfsum::mseries::MultiIndex;
use kdfsum::numeval::numeric_verify;
use kdfsum::Rational;

fn q(s: &str) -> Rational {
    s.parse().unwrap()
}

fn qs(v: &[&str]) -> Vec<Rational> {
    v.iter().map(|s| q(s)).collect()
}

fn two_slot() -> KdfSpec {
    KdfSpec::new(
        qs(&["1/2", "-7/3"]),
        qs(&["5/2"]),
        vec![qs(&["1/3", "2"]), qs(&["-5/2"])],
        vec![qs(&["7/2", "-1/3"]), qs(&["4/3"])],
    )
    .unwrap()
}

#[test]
fn eq8_right_side_is_the_derivative_formula() {
    let spec = two_slot();
    for r in 0..=3u32 {
        let inst = IdentityInstance::new(IdentityId::Eq8, spec.clone(), 2, r);
        let form = describe(&inst).unwrap();
        let (pre, shifted) = shift_spec(&spec, r).unwrap();
        assert_eq!(form.rhs.len(), 1);
        assert_eq!(form.rhs[0].spec, shifted);
        assert_eq!(form.rhs[0].shift, r);
        let beta_i = &spec.beta[0][1];
        let want = (Rational::sign_power(r) * pre).checked_div(&poch(&(beta_i - &Rational::one()), r)).unwrap();
        assert_eq!(form.rhs[0].coef.value().unwrap(), want);

        let direct = expand(&shifted, &SlotBinding::identity(2), 2, inst.cap - r)
            .unwrap()
            .lift_shift(&MultiIndex::unit(2, 0, r))
            .unwrap()
            .scale(&want);
        assert_eq!(build_rhs(&inst).unwrap(), direct);
        assert_eq!(verify(&inst).status, Status::Pass);
    }
}

#[test]
fn eq20_inner_sum_is_vandermonde() {
    let spec = KdfSpec::new(qs(&["2/3", "-5/2", "1/3"]), qs(&["3/2"]), vec![vec![]], vec![vec![]]).unwrap();
    for i in 1..=2usize {
        for r in 0..=4u32 {
            let inst = IdentityInstance::new(IdentityId::Eq20, spec.clone(), i, r).with_cap(6);
            let form = describe(&inst).unwrap();
            let c = &spec.a[i - 1];
            let d = &spec.a[i];
            let e = d - c - Rational::from(r) + Rational::one();
            for total in 0..=inst.cap {
                let sum: Rational = form
                    .lhs
                    .iter()
                    .map(|s| s.coef.value().unwrap() * poch(&s.spec.a[0], total))
                    .sum();
                let want = poch(d, total) * vandermonde_2f1(r, &(d + &Rational::from(total)), &e).unwrap();
                assert_eq!(sum, want, "i={i} r={r} |s|={total}");
                let closed = poch(&(c + &Rational::from(total)), r).checked_div(&poch(&(c - d), r)).unwrap();
                assert_eq!(vandermonde_2f1(r, &(d + &Rational::from(total)), &e).unwrap(), closed);
            }
            assert_eq!(verify(&inst).status, Status::Pass);
        }
    }
}

#[test]
fn eq20_single_variable_worked_instance() {
    let spec = KdfSpec::new(qs(&["1/2", "4/3"]), qs(&["7/2"]), vec![vec![]], vec![vec![]]).unwrap();
    let inst = IdentityInstance::new(IdentityId::Eq20, spec, 1, 3).with_cap(6);
    assert_eq!(build_lhs(&inst).unwrap(), build_rhs(&inst).unwrap());
}

fn with_binding(form: &IdentityForm, binding: SlotBinding, var_count: usize) -> IdentityForm {
    IdentityForm { binding, var_count, ..form.clone() }
}

#[test]
fn contiguity_formulas_hold_under_any_shared_binding() {
    // EQ10..EQ17 balance index by index, so the printed all-1/x1 and
    // 1/x1, x2, ..., xn argument lists are both valid.
    let ids = [
        (IdentityId::Eq10, 1, 2),
        (IdentityId::Eq11, 1, 2),
        (IdentityId::Eq12, 2, 3),
        (IdentityId::Eq13, 2, 2),
        (IdentityId::Eq14, 1, 3),
        (IdentityId::Eq15, 1, 3),
        (IdentityId::Eq16, 1, 2),
        (IdentityId::Eq17, 1, 2),
    ];
    for (id, i, r) in ids {
        let inst = IdentityInstance::new(id, two_slot(), i, r);
        assert_eq!(verify(&inst).status, Status::Pass, "{id}");
        let form = describe(&inst).unwrap();
        assert_eq!(form.binding, SlotBinding::collapsed(2, 1), "{id}");
        for (binding, vars) in [(SlotBinding::identity(2), 2), (SlotBinding::leading_power(2, 2), 2)] {
            let alt = with_binding(&form, binding, vars);
            let l = alt.build(&alt.lhs, inst.cap).unwrap();
            let rr = alt.build(&alt.rhs, inst.cap).unwrap();
            assert_eq!(l, rr, "{id}");
        }
    }
}

#[test]
fn printed_slot_one_arguments_are_used_by_the_literal_reading() {
    for id in [IdentityId::Eq11, IdentityId::Eq15] {
        let inst = IdentityInstance::new(id, two_slot(), 1, 3).with_reading(Reading::Literal);
        assert_eq!(describe(&inst).unwrap().binding, SlotBinding::identity(2));
        assert_eq!(verify(&inst).status, Status::Pass, "{id}");
    }
}

#[test]
fn readings_do_not_flip_between_instances() {
    for id in IdentityId::ALL.into_iter().filter(|id| id.has_correction()) {
        let mut literal_failures = 0;
        for index in 0..30 {
            let inst = generate(FuzzCase { id, index }, 99, 6, Reading::Corrected).unwrap();
            assert_eq!(verify(&inst).status, Status::Pass, "{id} #{index}");
            if verify(&inst.with_reading(Reading::Literal)).status == Status::Fail {
                literal_failures += 1;
            }
        }
        assert!(literal_failures > 0, "{id}: literal reading never failed");
    }
}

#[test]
fn uncorrected_ids_pass_under_both_readings() {
    for id in IdentityId::ALL.into_iter().filter(|id| !id.has_correction()) {
        for index in 0..10 {
            let inst = generate(FuzzCase { id, index }, 5, 6, Reading::Literal).unwrap();
            assert_eq!(verify(&inst).status, Status::Pass, "{id} #{index}");
        }
    }
}

#[test]
fn power_formulas_cover_three_layers() {
    let shape = Shape { p: 1, l: 1, q: vec![1, 1], m: vec![1, 0] };
    for id in [IdentityId::Eq18, IdentityId::Eq19] {
        for seed in 0..6 {
            let inst = random_instance(seed, id, &shape, 4, 7).unwrap();
            let power = inst.power_alpha.unwrap();
            assert!(power == 2 || power == 3);
            assert!(inst.cap >= 2 * power + 3);
            assert_eq!(verify(&inst).status, Status::Pass);
        }
    }
}

#[test]
fn numeric_layer_agrees_on_worked_instances() {
    let spec = KdfSpec::new(qs(&["1/2"]), qs(&["5/2"]), vec![qs(&["1"]), qs(&["1"])], vec![qs(&["3/2"]), qs(&["2"])])
        .unwrap();
    let inst = IdentityInstance::new(IdentityId::Eq5, spec.clone(), 1, 2).with_cap(5);
    let rep = numeric_verify(&inst, &[0.05, 0.05], 1e-8).unwrap();
    assert_eq!(rep.status, Status::Pass, "{rep:?}");
    assert!(rep.domain_ok);

    let zero = IdentityInstance::new(IdentityId::Eq6, spec.clone(), 1, 0);
    assert_eq!(numeric_verify(&zero, &[0.03, -0.02], 1e-12).unwrap().status, Status::Pass);

    let lit = IdentityInstance::new(IdentityId::Eq6, spec, 1, 2).with_reading(Reading::Literal);
    assert_eq!(verify(&lit).status, Status::Fail);
    assert_eq!(numeric_verify(&lit, &[0.05, 0.04], 1e-8).unwrap().status, Status::Fail);
}
