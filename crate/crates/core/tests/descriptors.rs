//! Mechanisms survive a trip through their JSON description and through
//! full tabulation without changing a single output.

use serial_quota::mechanisms::{Mechanism, MechanismDescriptor};
use serial_quota::properties::{check_axioms, Checker, Property};

fn round_trip(mech: &Mechanism) -> Mechanism {
    let json = serde_json::to_string(&MechanismDescriptor::from(mech)).unwrap();
    let descriptor: MechanismDescriptor = serde_json::from_str(&json).unwrap();
    descriptor.build(None, None).unwrap()
}

fn sources() -> Vec<&'static str> {
    vec![
        r#"{"kind":"serial_quota","q":[1,2],"p":[1,0]}"#,
        r#"{"kind":"serial_quota","q":[1,0,1],"p":[2,0,1],"m":3}"#,
        r#"{"kind":"serial_quota","q":[2,1],"class":"all","m":3}"#,
        r#"{"kind":"round_robin","n":2,"m":3}"#,
        r#"{"kind":"counter_non_truthful","n":2,"m":2}"#,
        r#"{"kind":"counter_bossy","n":3,"m":3}"#,
        r#"{"kind":"counter_non_neutral","n":3,"m":3,"a":2,"b":0}"#,
    ]
}

#[test]
fn descriptions_round_trip() {
    for src in sources() {
        let descriptor: MechanismDescriptor = serde_json::from_str(src).unwrap();
        let mech = descriptor.build(None, None).unwrap();
        let again = round_trip(&mech);
        assert_eq!(mech.tabulate().unwrap(), again.tabulate().unwrap(), "{src}");
        let table = round_trip(&mech.to_table().unwrap());
        assert_eq!(mech.tabulate().unwrap(), table.tabulate().unwrap(), "{src}");
    }
}

#[test]
fn tabulated_mechanisms_keep_their_verdicts() {
    for src in sources() {
        let mech = serde_json::from_str::<MechanismDescriptor>(src).unwrap().build(None, None).unwrap();
        let table = mech.to_table().unwrap();
        let verdicts = |m: &Mechanism| check_axioms(m).unwrap().iter().map(|r| r.verdict).collect::<Vec<_>>();
        assert_eq!(verdicts(&mech), verdicts(&table), "{src}");
        let c = Checker::default();
        assert_eq!(
            c.check(&mech, Property::Partition).unwrap().verdict,
            c.check(&table, Property::Partition).unwrap().verdict
        );
    }
}

#[test]
fn invalid_descriptions_are_rejected() {
    for src in [
        r#"{"kind":"serial_quota","q":[2,2],"m":3}"#,
        r#"{"kind":"serial_quota","q":[1,1],"p":[0,0]}"#,
        r#"{"kind":"counter_bossy","n":2,"m":3}"#,
        r#"{"kind":"counter_non_neutral","n":3,"m":3,"a":1,"b":1}"#,
        r#"{"kind":"round_robin","n":2}"#,
        r#"{"kind":"table","alloc":[[1,1]],"m":1,"n":2}"#,
    ] {
        let parsed = serde_json::from_str::<MechanismDescriptor>(src);
        assert!(parsed.map_or(true, |d| d.build(None, None).is_err()), "{src}");
    }
}
