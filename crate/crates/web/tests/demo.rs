use promptfill_web::DemoCore;

#[test]
fn demo_trains_parses_and_sweeps() {
    let demo = DemoCore::new().unwrap();
    let gammas = demo.gammas();
    let names: Vec<&str> = gammas.iter().map(|(c, _)| c.as_str()).collect();
    assert_eq!(names, ["matching", "condition"]);
    let tuned_matching = gammas[0].1;

    let view = demo
        .parse("petrol trimmer over 100 dollar", "condition", 0.4)
        .unwrap();
    let want =
        "SELECT * FROM ASINs WHERE Maching Algorithm(\"petrol trimmer\") == True and Price > 100";
    assert_eq!(view.sql, want);
    assert_eq!(view.clauses.len(), 2);
    assert_eq!(view.clauses[0].gamma, tuned_matching);
    assert_eq!(view.clauses[1].gamma, 0.4);
    for c in &view.clauses {
        assert!(!c.steps.is_empty());
        for s in &c.steps {
            assert!(s.ensembled.len() <= 5);
            assert_eq!(s.ensembled[0].token, s.chosen);
        }
    }

    // gamma 1 never consults the zero-shot model
    let few = demo
        .parse("petrol trimmer over 100 dollar", "condition", 1.0)
        .unwrap();
    assert!(few.clauses[1].steps.iter().all(|s| s.zero.is_empty()));

    let sweep = demo
        .sweep("petrol trimmer over 100 dollar", "condition")
        .unwrap();
    assert_eq!(sweep.len(), 11);
    assert_eq!(sweep[10].gamma, 1.0);
    assert_eq!(sweep[4].sql.as_deref(), Some(want));

    assert!(demo.parse("usb cable", "condition", 1.5).is_err());
    assert!(demo.parse("usb cable", "where", 0.5).is_err());
    assert!(!demo.samples().is_empty());
}

#[test]
fn confidence_matches_the_formulas() {
    let c = DemoCore::confidence(&[6.0, 3.0, 1.0]).unwrap();
    assert!((c.moc - 0.7).abs() < 1e-12);
    assert!((c.roc - 0.5).abs() < 1e-12);
    assert!(DemoCore::confidence(&[1.0]).is_err());
    assert!(DemoCore::confidence(&[-1.0, 2.0]).is_err());
}
