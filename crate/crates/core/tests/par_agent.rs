mod common;

use common::{dataset, decision, fixture_gateway, fixture_tools, stub, Recorder};
use framesearch_core::gateway::{Gateway, ScriptRule};
use framesearch_core::par::{run_par, EnrichStrategy, ParOptions};
use framesearch_core::prompts::Prompts;
use framesearch_core::services::Endpoint;

const PLANNER: &str = "检索规划器";

fn inst(id: &str) -> framesearch_core::QaInstance {
    dataset().into_iter().find(|i| i.id == id).unwrap()
}

fn planner(rules: Vec<ScriptRule>) -> Gateway {
    stub(rules, None)
}

fn round(n: u32, reply: String) -> ScriptRule {
    ScriptRule::new(&[PLANNER, &format!("当前轮次：{n}/")], reply)
}

fn model_calls(g: &Gateway) -> usize {
    g.transcript().len()
}

#[test]
fn always_search_planner_is_capped_at_max_rounds() {
    let tools = Recorder::new(fixture_tools());
    let p = planner(vec![ScriptRule::new(&[PLANNER], decision("img_ann", false))]);
    let out = run_par(&inst("q01"), &ParOptions::default(), &tools, &p, &fixture_gateway(), &Prompts::builtin()).unwrap();
    assert_eq!(out.rounds.len(), 6);
    assert_eq!(out.prediction.trace.retrieval_calls().count(), 6);
    let retrieval = tools.calls().iter().filter(|(e, _)| *e != Endpoint::KnLookup).count();
    assert_eq!(retrieval, 6);
    assert!(out.rounds.iter().all(|r| r.enrichment.is_some()));
    assert!(out.prediction.evidence.items().iter().any(|i| i.text.contains("最多叠加2层")));
}

#[test]
fn immediate_answer_makes_no_tool_calls() {
    let tools = Recorder::new(fixture_tools());
    let p = planner(vec![ScriptRule::new(&[PLANNER], decision("none", true))]);
    let out = run_par(&inst("q01"), &ParOptions::default(), &tools, &p, &fixture_gateway(), &Prompts::builtin()).unwrap();
    assert_eq!(out.rounds.len(), 1);
    assert!(tools.calls().is_empty());
    assert_eq!(out.prediction.trace.retrieval_calls().count(), 0);
}

#[test]
fn each_tool_gets_its_request_shape() {
    let tools = Recorder::new(fixture_tools());
    let p = planner(vec![
        round(1, decision("img_ann", false)),
        round(2, decision("multimodal_ann", false)),
        round(3, decision("text_ann", false)),
        round(4, decision("bm25_ann", false)),
        ScriptRule::new(&[PLANNER], decision("none", true)),
    ]);
    let q = inst("q04");
    let opts = ParOptions { k: 4, ..ParOptions::default() };
    let out = run_par(&q, &opts, &tools, &p, &fixture_gateway(), &Prompts::builtin()).unwrap();
    assert_eq!(out.rounds.len(), 5);
    let calls: Vec<_> = tools.calls().into_iter().filter(|(e, _)| *e != Endpoint::KnLookup).collect();
    let expect = [
        (Endpoint::ImgAnn, serde_json::json!({ "img": q.image, "top_k": 4 })),
        (Endpoint::MultimodalAnn, serde_json::json!({ "query": q.question, "image_path": q.image, "top_k": 4 })),
        (Endpoint::TextAnn, serde_json::json!({ "query": q.question, "top_k": 4 })),
        (Endpoint::Bm25Ann, serde_json::json!({ "query": "Dust2 A点", "top_k": 4 })),
    ];
    assert_eq!(calls, expect);
    assert!(out.rounds[0].enrichment.is_some());
    assert!(out.rounds[1..].iter().all(|r| r.enrichment.is_none()));
}

#[test]
fn enrichment_needs_image_records() {
    let tools = Recorder::new(fixture_tools()).emptying(Endpoint::ImgAnn);
    let p = planner(vec![round(1, decision("img_ann", false)), ScriptRule::new(&[PLANNER], decision("none", true))]);
    let out = run_par(&inst("q01"), &ParOptions::default(), &tools, &p, &fixture_gateway(), &Prompts::builtin()).unwrap();
    assert_eq!(out.rounds[0].n_records, 0);
    assert!(out.rounds[0].enrichment.is_none());
    assert!(tools.calls().iter().all(|(e, _)| *e != Endpoint::KnLookup));
}

#[test]
fn enrichment_adds_knowledge_for_majority_element() {
    let tools = Recorder::new(fixture_tools());
    let p = planner(vec![round(1, decision("img_ann", false)), ScriptRule::new(&[PLANNER], decision("none", true))]);
    let out = run_par(&inst("q01"), &ParOptions::default(), &tools, &p, &fixture_gateway(), &Prompts::builtin()).unwrap();
    let e = out.rounds[0].enrichment.as_ref().unwrap();
    assert_eq!(e.queries, ["合鸣·彻空冥雷"]);
    assert_eq!(e.found, 1);
    assert!(e.added >= 1);
    let kn = tools.calls().into_iter().find(|(e, _)| *e == Endpoint::KnLookup).unwrap();
    assert_eq!(kn.1, serde_json::json!({ "queries": ["合鸣·彻空冥雷"] }));
    assert!(out.prediction.evidence.items().iter().any(|i| i.source == "kn_lookup"));
}

#[test]
fn knowledge_miss_and_failure_are_not_fatal() {
    let p = || planner(vec![round(1, decision("img_ann", false)), ScriptRule::new(&[PLANNER], decision("none", true))]);
    let miss = Recorder::new(fixture_tools()).emptying(Endpoint::KnLookup);
    let out = run_par(&inst("q01"), &ParOptions::default(), &miss, &p(), &fixture_gateway(), &Prompts::builtin()).unwrap();
    let e = out.rounds[0].enrichment.as_ref().unwrap();
    assert_eq!((e.found, e.added), (0, 0));

    let broken = Recorder::new(fixture_tools()).failing(Endpoint::KnLookup);
    let out = run_par(&inst("q01"), &ParOptions::default(), &broken, &p(), &fixture_gateway(), &Prompts::builtin()).unwrap();
    let e = out.rounds[0].enrichment.as_ref().unwrap();
    assert!(e.error.as_deref().unwrap().contains("kn_lookup"));
    assert_eq!(out.rounds.len(), 2);
}

#[test]
fn llm_selection_with_majority_fallback() {
    let opts = ParOptions { enrich: EnrichStrategy::Llm, ..ParOptions::default() };
    let base = vec![round(1, decision("img_ann", false)), ScriptRule::new(&[PLANNER], decision("none", true))];

    let mut rules = vec![ScriptRule::new(&["候选知识查询"], "[\"合鸣·彻空冥雷\"]")];
    rules.extend(base.clone());
    let out = run_par(&inst("q01"), &opts, &fixture_tools(), &planner(rules), &fixture_gateway(), &Prompts::builtin()).unwrap();
    assert_eq!(out.rounds[0].enrichment.as_ref().unwrap().queries, ["合鸣·彻空冥雷"]);
    assert!(out.prediction.trace.steps.iter().any(|s| s.model.as_deref() == Some("kn_select")));

    let mut rules = vec![ScriptRule::new(&["候选知识查询"], "[\"不存在的查询\"]")];
    rules.extend(base);
    let out = run_par(&inst("q01"), &opts, &fixture_tools(), &planner(rules), &fixture_gateway(), &Prompts::builtin()).unwrap();
    assert_eq!(out.rounds[0].enrichment.as_ref().unwrap().queries, ["合鸣·彻空冥雷"]);
}

#[test]
fn two_malformed_replies_force_a_stop() {
    let tools = Recorder::new(fixture_tools());
    let p = planner(vec![ScriptRule::new(&[PLANNER], "我觉得应该先看看图片。").in_transcript()]);
    let out = run_par(&inst("q01"), &ParOptions::default(), &tools, &p, &fixture_gateway(), &Prompts::builtin()).unwrap();
    assert_eq!(out.rounds.len(), 1);
    assert_eq!(out.rounds[0].malformed, 2);
    assert!(out.rounds[0].decision.can_answer_now);
    assert_eq!(model_calls(&p), 2);
    assert!(tools.calls().is_empty());
}

#[test]
fn one_malformed_reply_is_reprompted() {
    let p = planner(vec![
        ScriptRule::new(&["MALFORMED-MARK"], decision("none", true)).in_transcript(),
        ScriptRule::new(&[PLANNER], "MALFORMED-MARK"),
    ]);
    let out = run_par(&inst("q01"), &ParOptions::default(), &fixture_tools(), &p, &fixture_gateway(), &Prompts::builtin()).unwrap();
    assert_eq!(out.rounds[0].malformed, 1);
    assert_eq!(out.rounds.len(), 1);
    let last = p.transcript().last().unwrap().messages.last().unwrap().text.clone();
    assert!(last.contains("JSON"), "{last}");
}

#[test]
fn bm25_without_query_is_malformed() {
    let bad = serde_json::json!({
        "can_answer_now": false, "selected_tool": "bm25_ann", "bm25_query": "", "reason": "", "confidence": 0.3
    })
    .to_string();
    let p = planner(vec![ScriptRule::new(&[PLANNER], bad).in_transcript()]);
    let tools = Recorder::new(fixture_tools());
    let out = run_par(&inst("q01"), &ParOptions::default(), &tools, &p, &fixture_gateway(), &Prompts::builtin()).unwrap();
    assert_eq!(out.rounds[0].malformed, 2);
    assert!(tools.calls().is_empty());
}

#[test]
fn tool_error_is_recorded_and_loop_continues() {
    let tools = Recorder::new(fixture_tools()).failing(Endpoint::TextAnn);
    let p = planner(vec![
        round(1, decision("text_ann", false)),
        round(2, decision("img_ann", false)),
        ScriptRule::new(&[PLANNER], decision("none", true)),
    ]);
    let out = run_par(&inst("q01"), &ParOptions::default(), &tools, &p, &fixture_gateway(), &Prompts::builtin()).unwrap();
    assert_eq!(out.rounds.len(), 3);
    assert!(out.rounds[0].error.as_deref().unwrap().contains("500"));
    let second_prompt = &p.transcript()[1].messages[0].text;
    assert!(second_prompt.contains("text_ann: 调用失败"), "{second_prompt}");
    assert!(out.rounds[1].error.is_none() && out.rounds[1].n_records > 0);
}

#[test]
fn max_rounds_is_configurable() {
    let p = planner(vec![ScriptRule::new(&[PLANNER], decision("text_ann", false))]);
    for max_rounds in 1..=4 {
        let opts = ParOptions { max_rounds, ..ParOptions::default() };
        let tools = Recorder::new(fixture_tools());
        let out = run_par(&inst("q03"), &opts, &tools, &p, &fixture_gateway(), &Prompts::builtin()).unwrap();
        assert_eq!(out.rounds.len() as u32, max_rounds);
        assert_eq!(tools.calls().len() as u32, max_rounds);
    }
}
