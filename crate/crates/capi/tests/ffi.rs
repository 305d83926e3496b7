//! Drive the C entry points exactly as a foreign caller would: strings in,
//! status codes and JSON out, every handle and string freed.

use std::ffi::{CStr, CString, c_char};

use psep_capi::*;

fn fixture_cstring(name: &str) -> CString {
    let path =
        std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    CString::new(std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Take ownership of a returned string and free it on the way out.
unsafe fn take_string(p: *mut c_char) -> String {
    assert!(!p.is_null(), "expected a string payload");
    let text = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string();
    unsafe { psep_string_free(p) };
    text
}

unsafe fn take_json(p: *mut c_char) -> serde_json::Value {
    serde_json::from_str(&unsafe { take_string(p) }).unwrap()
}

fn last_error_text() -> Option<String> {
    let p = psep_last_error();
    if p.is_null() { None } else { Some(unsafe { take_string(p) }) }
}

unsafe fn parse_fixture(name: &str) -> *mut PsepProblem {
    let json = fixture_cstring(name);
    let mut handle: *mut PsepProblem = std::ptr::null_mut();
    let code = unsafe { psep_problem_parse(json.as_ptr(), &mut handle) };
    assert_eq!(code, PSEP_OK, "{name}: {:?}", last_error_text());
    assert!(!handle.is_null());
    handle
}

#[test]
fn versions_are_pinned() {
    assert_eq!(psep_abi_version(), 1);
    assert_eq!(psep_format_version(), 1);
}

#[test]
fn problems_round_trip_through_handles() {
    unsafe {
        let p = parse_fixture("fix_a.json");
        assert_eq!(psep_problem_prime(p), 2);
        assert_eq!(psep_problem_vertices(p), 2);
        assert_eq!(psep_problem_pairs(p), 1);

        let mut json: *mut c_char = std::ptr::null_mut();
        assert_eq!(psep_problem_to_json(p, &mut json), PSEP_OK);
        let round = CString::new(take_string(json)).unwrap();
        let mut p2: *mut PsepProblem = std::ptr::null_mut();
        assert_eq!(psep_problem_parse(round.as_ptr(), &mut p2), PSEP_OK);
        assert_eq!(psep_problem_prime(p2), 2);
        assert_eq!(psep_problem_vertices(p2), 2);
        assert_eq!(psep_problem_pairs(p2), 1);

        psep_problem_free(p2);
        psep_problem_free(p);
    }
}

#[test]
fn null_and_garbage_inputs_are_reported_not_crashed() {
    unsafe {
        let mut handle: *mut PsepProblem = std::ptr::null_mut();
        assert_eq!(psep_problem_parse(std::ptr::null(), &mut handle), PSEP_ERR_NULL_POINTER);
        assert!(last_error_text().unwrap().contains("NULL"));

        let garbage = CString::new("{not json").unwrap();
        assert_eq!(psep_problem_parse(garbage.as_ptr(), &mut handle), PSEP_ERR_INPUT);
        assert!(last_error_text().is_some());

        let bad_utf8 = CString::new([0xffu8, 0xfe]).unwrap();
        assert_eq!(psep_problem_parse(bad_utf8.as_ptr(), &mut handle), PSEP_ERR_ENCODING);
        assert!(last_error_text().unwrap().contains("UTF-8"));

        // Accessors and destructors shrug at NULL.
        assert_eq!(psep_problem_prime(std::ptr::null()), 0);
        assert_eq!(psep_certificate_depth(std::ptr::null()), 0);
        psep_problem_free(std::ptr::null_mut());
        psep_certificate_free(std::ptr::null_mut());
        psep_string_free(std::ptr::null_mut());
    }
}

#[test]
fn error_slot_is_cleared_by_the_next_successful_call() {
    unsafe {
        let mut handle: *mut PsepProblem = std::ptr::null_mut();
        assert_eq!(psep_problem_parse(std::ptr::null(), &mut handle), PSEP_ERR_NULL_POINTER);
        assert!(last_error_text().is_some());

        let p = parse_fixture("fix_d.json");
        assert!(last_error_text().is_none(), "success must clear the slot");
        psep_problem_free(p);
    }
}

#[test]
fn check_reports_both_verdicts() {
    unsafe {
        let good = parse_fixture("fix_a.json");
        let mut out: *mut c_char = std::ptr::null_mut();
        assert_eq!(psep_check(good, &mut out), PSEP_OK);
        let report = take_json(out);
        assert_eq!(report["verdict"], "compatible");
        assert_eq!(report["levels"], 2);
        psep_problem_free(good);

        let bad = parse_fixture("fix_b.json");
        let mut out: *mut c_char = std::ptr::null_mut();
        assert_eq!(psep_check(bad, &mut out), PSEP_NEGATIVE);
        let report = take_json(out);
        assert_eq!(report["verdict"], "incompatible");
        assert_eq!(report["holonomy"], 2);
        assert_eq!(report["pair"], "t");
        psep_problem_free(bad);

        // The payload is optional: a NULL out still yields the verdict.
        let good = parse_fixture("fix_a.json");
        assert_eq!(psep_check(good, std::ptr::null_mut()), PSEP_OK);
        psep_problem_free(good);
    }
}

#[test]
fn check_without_series_data_is_an_input_error() {
    unsafe {
        let text = {
            let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
                .join("../../fixtures/fix_e.json");
            let mut file: serde_json::Value =
                serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
            let obj = file.as_object_mut().unwrap();
            obj.remove("vertex_series");
            obj.remove("edge_series");
            obj.remove("level_maps");
            CString::new(serde_json::to_string(&file).unwrap()).unwrap()
        };
        let mut p: *mut PsepProblem = std::ptr::null_mut();
        assert_eq!(psep_problem_parse(text.as_ptr(), &mut p), PSEP_OK);
        assert_eq!(psep_check(p, std::ptr::null_mut()), PSEP_ERR_INPUT);
        assert!(last_error_text().unwrap().contains("chief-series"));
        psep_problem_free(p);
    }
}

#[test]
fn separate_yields_a_verifying_certificate() {
    unsafe {
        let p = parse_fixture("fix_e.json");
        let word = CString::new("abab").unwrap();
        let mut cert: *mut PsepCertificate = std::ptr::null_mut();
        assert_eq!(psep_separate(p, word.as_ptr(), 0, &mut cert), PSEP_OK);
        assert_eq!(psep_certificate_depth(cert), 2);
        assert_eq!(psep_certificate_prime(cert), 2);

        assert_eq!(psep_verify(p, cert, std::ptr::null_mut()), PSEP_OK);

        // Serialize, reload, and verify the reloaded copy too.
        let mut json: *mut c_char = std::ptr::null_mut();
        assert_eq!(psep_certificate_to_json(cert, &mut json), PSEP_OK);
        let text = take_string(json);
        let reloaded_src = CString::new(text.clone()).unwrap();
        let mut reloaded: *mut PsepCertificate = std::ptr::null_mut();
        assert_eq!(psep_certificate_parse(reloaded_src.as_ptr(), &mut reloaded), PSEP_OK);
        assert_eq!(psep_verify(p, reloaded, std::ptr::null_mut()), PSEP_OK);
        psep_certificate_free(reloaded);

        // A tampered witness parses but is rejected, with a reason.
        let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        doc["terminal"]["Free"]["witness"]["monomial"] = serde_json::json!([0]);
        let tampered_src = CString::new(doc.to_string()).unwrap();
        let mut tampered: *mut PsepCertificate = std::ptr::null_mut();
        assert_eq!(psep_certificate_parse(tampered_src.as_ptr(), &mut tampered), PSEP_OK);
        let mut reason: *mut c_char = std::ptr::null_mut();
        assert_eq!(psep_verify(p, tampered, &mut reason), PSEP_NEGATIVE);
        assert!(!reason.is_null());
        let why = take_string(reason);
        assert!(!why.is_empty());
        psep_certificate_free(tampered);

        psep_certificate_free(cert);
        psep_problem_free(p);
    }
}

#[test]
fn separate_rejects_identity_and_unknown_words() {
    unsafe {
        let p = parse_fixture("fix_e.json");
        let mut cert: *mut PsepCertificate = std::ptr::null_mut();

        let identity = CString::new("aa").unwrap();
        assert_eq!(psep_separate(p, identity.as_ptr(), 0, &mut cert), PSEP_ERR_INPUT);
        assert!(last_error_text().is_some());

        let unknown = CString::new("no-such-word").unwrap();
        assert_eq!(psep_separate(p, unknown.as_ptr(), 0, &mut cert), PSEP_ERR_INPUT);
        assert!(last_error_text().unwrap().contains("no-such-word"));

        psep_problem_free(p);
    }
}

#[test]
fn separate_on_incompatible_data_is_the_negative_verdict() {
    unsafe {
        let p = parse_fixture("fix_b.json");
        let word = CString::new("a").unwrap();
        let mut cert: *mut PsepCertificate = std::ptr::null_mut();
        assert_eq!(psep_separate(p, word.as_ptr(), 0, &mut cert), PSEP_NEGATIVE);
        assert!(cert.is_null(), "no certificate may be written on the negative verdict");
        psep_problem_free(p);
    }
}

#[test]
fn cover_embeds_a_reloadable_problem() {
    unsafe {
        let p = parse_fixture("fix_e.json");
        let mut out: *mut c_char = std::ptr::null_mut();
        assert_eq!(psep_cover(p, &mut out), PSEP_OK);
        let report = take_json(out);
        assert_eq!(report["verdict"], "built");
        assert_eq!(report["graph_rank"], 1);

        let embedded = CString::new(report["problem"].to_string()).unwrap();
        let mut cover: *mut PsepProblem = std::ptr::null_mut();
        assert_eq!(
            psep_problem_parse(embedded.as_ptr(), &mut cover),
            PSEP_OK,
            "{:?}",
            last_error_text()
        );
        assert_eq!(psep_problem_vertices(cover), 2);
        assert_eq!(psep_problem_pairs(cover), 2);
        assert_eq!(psep_check(cover, std::ptr::null_mut()), PSEP_OK);

        psep_problem_free(cover);
        psep_problem_free(p);
    }
}

#[test]
fn search_covers_all_three_outcomes() {
    unsafe {
        let p = parse_fixture("fix_a.json");
        let mut out: *mut c_char = std::ptr::null_mut();
        assert_eq!(psep_search(p, 100_000, &mut out), PSEP_OK);
        let report = take_json(out);
        assert_eq!(report["verdict"], "found");
        let embedded = CString::new(report["problem"].to_string()).unwrap();
        let mut found: *mut PsepProblem = std::ptr::null_mut();
        assert_eq!(psep_problem_parse(embedded.as_ptr(), &mut found), PSEP_OK);
        assert_eq!(psep_check(found, std::ptr::null_mut()), PSEP_OK);
        psep_problem_free(found);

        assert_eq!(psep_search(p, 0, std::ptr::null_mut()), PSEP_ERR_BUDGET);
        assert!(last_error_text().unwrap().contains("budget"));
        psep_problem_free(p);

        let hnn = parse_fixture("fix_b.json");
        let mut out: *mut c_char = std::ptr::null_mut();
        assert_eq!(psep_search(hnn, 100_000, &mut out), PSEP_NEGATIVE);
        let report = take_json(out);
        assert_eq!(report["verdict"], "exhausted");
        psep_problem_free(hnn);
    }
}

#[test]
fn freesep_matches_the_library_verdicts() {
    unsafe {
        let word = CString::new("x1 x1").unwrap();
        let mut out: *mut c_char = std::ptr::null_mut();
        assert_eq!(psep_freesep(2, 1, word.as_ptr(), 0, &mut out), PSEP_OK);
        let report = take_json(out);
        assert_eq!(report["verdict"], "separated");
        assert_eq!(report["degree"], 2);
        assert_eq!(report["monomial"], serde_json::json!(["X1", "X1"]));

        let trivial = CString::new("x1 x1'").unwrap();
        let mut out: *mut c_char = std::ptr::null_mut();
        assert_eq!(psep_freesep(2, 1, trivial.as_ptr(), 0, &mut out), PSEP_NEGATIVE);
        assert_eq!(take_json(out)["verdict"], "trivial");

        let word = CString::new("x1 x1").unwrap();
        assert_eq!(
            psep_freesep(2, 1, word.as_ptr(), 1, std::ptr::null_mut()),
            PSEP_ERR_BUDGET,
            "the witness lives at degree 2, above the cap of 1"
        );

        let word = CString::new("x1").unwrap();
        assert_eq!(psep_freesep(6, 1, word.as_ptr(), 0, std::ptr::null_mut()), PSEP_ERR_INPUT);
        assert!(last_error_text().unwrap().contains("prime"));

        let word = CString::new("x3").unwrap();
        assert_eq!(psep_freesep(2, 2, word.as_ptr(), 0, std::ptr::null_mut()), PSEP_ERR_INPUT);
        assert!(last_error_text().unwrap().contains("rank"));
    }
}
