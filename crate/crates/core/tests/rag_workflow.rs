mod common;

use common::{dataset, fixture_gateway, fixture_tools, Recorder};
use framesearch_core::prompts::Prompts;
use framesearch_core::rag::{run_rag, select_core_element, ElementSource, RagOptions, RunError};
use framesearch_core::services::{Endpoint, ToolClient};

fn inst(id: &str) -> framesearch_core::QaInstance {
    dataset().into_iter().find(|i| i.id == id).unwrap()
}

#[test]
fn void_thunder_case_answers_from_evidence() {
    let tools = Recorder::new(fixture_tools());
    let gw = fixture_gateway();
    let q = inst("q01");
    let pred = run_rag(&q, &RagOptions::default(), &tools, &gw, &Prompts::builtin()).unwrap();
    assert_eq!(pred.answer_text, "2层");
    let calls = tools.calls();
    assert_eq!(calls.len(), 2);
    assert_eq!(calls[0].0, Endpoint::ImgAnn);
    assert_eq!(calls[0].1["img"], q.image.as_str());
    assert_eq!(calls[1].0, Endpoint::TextAnn);
    assert_eq!(calls[1].1["query"], format!("合鸣·彻空冥雷 {}", q.question));
    assert!(pred.evidence.items().iter().any(|e| e.text.contains("最多可叠加2层")));
    assert_eq!(pred.trace.retrieval_calls().count(), 2);
}

#[test]
fn empty_image_results_use_question_alone() {
    let tools = Recorder::new(fixture_tools()).emptying(Endpoint::ImgAnn);
    let q = inst("q04");
    let pred = run_rag(&q, &RagOptions::default(), &tools, &fixture_gateway(), &Prompts::builtin()).unwrap();
    assert_eq!(tools.calls()[1].1["query"], q.question.as_str());
    assert!(!pred.answer_text.is_empty());
}

#[test]
fn unlabelled_gallery_hits_take_fallback_path() {
    let tools = fixture_tools();
    for id in ["q19", "q20"] {
        let q = inst(id);
        let recs = tools.ann(Endpoint::ImgAnn, &serde_json::json!({ "img": q.image, "top_k": 5 })).unwrap();
        assert_eq!(select_core_element(&recs).source, ElementSource::Empty, "{id}");
    }
}

#[test]
fn k_one_bounds_evidence() {
    let opts = RagOptions { k: 1, ..RagOptions::default() };
    for q in dataset() {
        let pred = run_rag(&q, &opts, &fixture_tools(), &fixture_gateway(), &Prompts::builtin()).unwrap();
        assert!(pred.evidence.len() <= 2);
    }
}

#[test]
fn tool_failure_names_endpoint() {
    let tools = Recorder::new(fixture_tools()).failing(Endpoint::TextAnn);
    let err = run_rag(&inst("q01"), &RagOptions::default(), &tools, &fixture_gateway(), &Prompts::builtin()).unwrap_err();
    assert!(matches!(err, RunError::Tool(_)));
    assert!(err.to_string().contains("text_ann"), "{err}");
}

#[test]
fn answerer_failure_is_an_error() {
    let gw = common::stub(vec![], None);
    let err = run_rag(&inst("q01"), &RagOptions::default(), &fixture_tools(), &gw, &Prompts::builtin()).unwrap_err();
    assert!(matches!(err, RunError::Gateway(_)));
}

#[test]
fn runs_are_deterministic() {
    let a = run_rag(&inst("q07"), &RagOptions::default(), &fixture_tools(), &fixture_gateway(), &Prompts::builtin()).unwrap();
    let b = run_rag(&inst("q07"), &RagOptions::default(), &fixture_tools(), &fixture_gateway(), &Prompts::builtin()).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}
