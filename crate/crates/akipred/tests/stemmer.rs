//! Porter stemmer checked against a frozen reference vocabulary derived from
//! the algorithm's published rule tables, plus idempotence behavior on the
//! reference outputs.

use std::collections::BTreeSet;

use akipred::textprep::porter_stem;

/// (word, expected stem) pairs covering every rule group of the five steps.
const REFERENCE: &[(&str, &str)] = &[
    // step 1a
    ("caresses", "caress"),
    ("ponies", "poni"),
    ("ties", "ti"),
    ("caress", "caress"),
    ("cats", "cat"),
    ("horses", "hors"),
    ("dies", "di"),
    // step 1b and its cleanup
    ("feed", "feed"),
    ("agreed", "agre"),
    ("plastered", "plaster"),
    ("bled", "bled"),
    ("motoring", "motor"),
    ("sing", "sing"),
    ("conflated", "conflat"),
    ("troubled", "troubl"),
    ("sized", "size"),
    ("hopping", "hop"),
    ("tanned", "tan"),
    ("falling", "fall"),
    ("hissing", "hiss"),
    ("fizzed", "fizz"),
    ("failing", "fail"),
    ("filing", "file"),
    ("stemming", "stem"),
    ("dying", "dy"),
    // step 1c
    ("happy", "happi"),
    ("sky", "sky"),
    // step 2 (through the later steps)
    ("relational", "relat"),
    ("conditional", "condit"),
    ("rational", "ration"),
    ("valency", "valenc"),
    ("hesitancy", "hesit"),
    ("digitizer", "digit"),
    ("radically", "radic"),
    ("differently", "differ"),
    ("analogously", "analog"),
    ("vietnamization", "vietnam"),
    ("predication", "predic"),
    ("operator", "oper"),
    ("feudalism", "feudal"),
    ("decisiveness", "decis"),
    ("hopefulness", "hope"),
    ("callousness", "callous"),
    ("formality", "formal"),
    ("sensitivity", "sensit"),
    ("sensibility", "sensibl"),
    // step 3
    ("triplicate", "triplic"),
    ("formative", "form"),
    ("formalize", "formal"),
    ("electricity", "electr"),
    ("electrical", "electr"),
    ("hopeful", "hope"),
    ("goodness", "good"),
    ("happiness", "happi"),
    // step 4
    ("revival", "reviv"),
    ("allowance", "allow"),
    ("inference", "infer"),
    ("airliner", "airlin"),
    ("gyroscopic", "gyroscop"),
    ("adjustable", "adjust"),
    ("defensible", "defens"),
    ("irritant", "irrit"),
    ("replacement", "replac"),
    ("adjustment", "adjust"),
    ("dependent", "depend"),
    ("adoption", "adopt"),
    ("communism", "commun"),
    ("activate", "activ"),
    ("angularity", "angular"),
    ("homologous", "homolog"),
    ("effective", "effect"),
    ("bowdlerize", "bowdler"),
    // step 5
    ("probate", "probat"),
    ("rate", "rate"),
    ("cease", "ceas"),
    ("controll", "control"),
    ("roll", "roll"),
    ("relate", "relat"),
    // multi-step classics
    ("generalizations", "gener"),
    ("oscillators", "oscil"),
    ("connected", "connect"),
    ("connecting", "connect"),
    ("connection", "connect"),
    ("connections", "connect"),
    // clinical-register words the pipeline actually sees
    ("creatinine", "creatinin"),
    ("dialysis", "dialysi"),
    ("renal", "renal"),
    ("failure", "failur"),
    ("kidneys", "kidnei"),
    ("kidney", "kidnei"),
    ("septic", "septic"),
    ("infusion", "infus"),
    ("hypotension", "hypotens"),
];

#[test]
fn reference_vocabulary() {
    let mut failures = Vec::new();
    for &(word, expected) in REFERENCE {
        let got = porter_stem(word);
        if got != expected {
            failures.push(format!("{word}: expected {expected}, got {got}"));
        }
    }
    assert!(failures.is_empty(), "stemmer mismatches:\n{}", failures.join("\n"));
}

/// Re-stemming a stem is the identity for almost all reference outputs. The
/// algorithm is not idempotent in general: outputs ending in a bare `s` lose
/// it to the plural rule, and `agre` drops its final `e`. Those exceptions
/// are frozen here so any behavioral drift surfaces.
#[test]
fn idempotent_on_reference_outputs_except_known_cases() {
    let known_exceptions: BTreeSet<&str> =
        ["agre", "callous", "ceas", "decis", "defens", "hors", "hypotens", "infus"]
            .into_iter()
            .collect();

    let mut actual_exceptions = BTreeSet::new();
    for &(_, output) in REFERENCE {
        if porter_stem(output) != output {
            actual_exceptions.insert(output);
        }
    }
    assert_eq!(actual_exceptions, known_exceptions);

    // and the known cases restem the way the rules say
    assert_eq!(porter_stem("agre"), "agr");
    assert_eq!(porter_stem("defens"), "defen");
}
