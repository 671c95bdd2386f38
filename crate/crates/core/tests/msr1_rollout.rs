mod common;

use common::{dataset, fixture_tools, stub, Recorder};
use framesearch_core::gateway::{DecodeSpec, ScriptRule};
use framesearch_core::msr1::{
    compute_reward, extract_answer, normalize_advantages, parse_action, render_action, rollout, rollout_group, Action,
    RewardScheme, RewardWeights, RolloutOptions, Trajectory,
};
use framesearch_core::prompts::Prompts;
use framesearch_core::services::Endpoint;
use proptest::prelude::*;

const R1: &str = "合法动作只有三种";
const AFTER_IMG: &str = "你已经完成了一轮图搜";
const AFTER_TEXT: &str = "你已经完成文本搜索";
const IMG: &str = "<reason>先看图</reason><search><img></search>";
const TEXT: &str = "<reason>查资料</reason><text_search>合鸣·彻空冥雷 叠加层数</text_search>";
const RIGHT: &str = "<reason>依据证据</reason><answer>2层</answer>";
const WRONG: &str = "<reason>猜测</reason><answer>1层</answer>";

fn q01() -> framesearch_core::QaInstance {
    dataset().into_iter().find(|i| i.id == "q01").unwrap()
}

fn twice(p: &str) -> String {
    format!("(?s){p}.*{p}")
}

struct Case {
    name: &'static str,
    rules: Vec<ScriptRule>,
    fail: Option<Endpoint>,
    kinds: &'static [&'static str],
    tools: &'static [&'static str],
    answer: &'static str,
    invalid: u32,
    well_formed: bool,
}

fn rule(p: &str, reply: &str) -> ScriptRule {
    ScriptRule::new(&[p], reply)
}

fn cases() -> Vec<Case> {
    let t = |p: &str, reply: &str| ScriptRule::new(&[p], reply).in_transcript();
    vec![
        Case {
            name: "answer_only",
            rules: vec![rule(R1, RIGHT)],
            fail: None,
            kinds: &["answer"],
            tools: &[],
            answer: "2层",
            invalid: 0,
            well_formed: true,
        },
        Case {
            name: "image_then_answer",
            rules: vec![rule(AFTER_IMG, RIGHT), rule(R1, IMG)],
            fail: None,
            kinds: &["image_search", "answer"],
            tools: &["img_ann"],
            answer: "2层",
            invalid: 0,
            well_formed: true,
        },
        Case {
            name: "text_then_answer",
            rules: vec![rule(AFTER_TEXT, RIGHT), rule(R1, TEXT)],
            fail: None,
            kinds: &["text_search", "answer"],
            tools: &["text_ann"],
            answer: "2层",
            invalid: 0,
            well_formed: true,
        },
        Case {
            name: "image_text_answer",
            rules: vec![rule(AFTER_TEXT, RIGHT), rule(AFTER_IMG, TEXT), rule(R1, IMG)],
            fail: None,
            kinds: &["image_search", "text_search", "answer"],
            tools: &["img_ann", "text_ann"],
            answer: "2层",
            invalid: 0,
            well_formed: true,
        },
        Case {
            name: "invalid_then_answer",
            rules: vec![t("PROSE-1", RIGHT), rule(R1, "PROSE-1 没有动作标签")],
            fail: None,
            kinds: &["invalid", "answer"],
            tools: &[],
            answer: "2层",
            invalid: 1,
            well_formed: false,
        },
        Case {
            name: "invalid_three_times",
            rules: vec![rule(R1, "<answer>1层</answer><answer>2层</answer><search><img></search>")],
            fail: None,
            kinds: &["invalid", "invalid", "invalid"],
            tools: &[],
            answer: "1层",
            invalid: 3,
            well_formed: false,
        },
        Case {
            name: "repeated_image_search",
            rules: vec![t(&twice(AFTER_IMG), RIGHT), rule(AFTER_IMG, IMG), rule(R1, IMG)],
            fail: None,
            kinds: &["image_search", "image_search", "answer"],
            tools: &["img_ann", "img_ann"],
            answer: "2层",
            invalid: 0,
            well_formed: false,
        },
        Case {
            name: "search_in_final_round",
            rules: vec![rule(AFTER_TEXT, IMG), rule(AFTER_IMG, TEXT), rule(R1, IMG)],
            fail: None,
            kinds: &["image_search", "text_search", "image_search"],
            tools: &["img_ann", "text_ann"],
            answer: "",
            invalid: 0,
            well_formed: false,
        },
        Case {
            name: "final_round_mixed_tags",
            rules: vec![
                t(&twice(AFTER_TEXT), "<answer>2层</answer><text_search>再查一次</text_search>"),
                rule(AFTER_TEXT, TEXT),
                rule(R1, TEXT),
            ],
            fail: None,
            kinds: &["text_search", "text_search", "invalid"],
            tools: &["text_ann", "text_ann"],
            answer: "2层",
            invalid: 1,
            well_formed: false,
        },
        Case {
            name: "tags_inside_reason",
            rules: vec![rule(R1, "<reason>也许需要<search><img></search>但不必</reason><answer>2层</answer>")],
            fail: None,
            kinds: &["answer"],
            tools: &[],
            answer: "2层",
            invalid: 0,
            well_formed: true,
        },
        Case {
            name: "empty_text_query",
            rules: vec![t("<text_search> </text_search>", WRONG), rule(R1, "<reason>x</reason><text_search> </text_search>")],
            fail: None,
            kinds: &["invalid", "answer"],
            tools: &[],
            answer: "1层",
            invalid: 1,
            well_formed: false,
        },
        Case {
            name: "image_tool_failure",
            rules: vec![rule(AFTER_IMG, WRONG), rule(R1, IMG)],
            fail: Some(Endpoint::ImgAnn),
            kinds: &["image_search", "answer"],
            tools: &["img_ann"],
            answer: "1层",
            invalid: 0,
            well_formed: true,
        },
    ]
}

fn run_case(c: &Case) -> (Trajectory, Vec<(Endpoint, serde_json::Value)>) {
    let mut tools = Recorder::new(fixture_tools());
    if let Some(e) = c.fail {
        tools = tools.failing(e);
    }
    let policy = stub(c.rules.clone(), None);
    let traj = rollout(&q01(), &policy, &RolloutOptions::default(), &tools, &Prompts::builtin()).unwrap();
    assert!(policy.transcript().len() <= 3, "{}", c.name);
    (traj, tools.calls())
}

#[test]
fn scripted_policies_follow_the_state_machine() {
    let q = q01();
    for c in cases() {
        let (traj, calls) = run_case(&c);
        let kinds: Vec<_> = traj.rounds.iter().map(|r| r.action.kind()).collect();
        assert_eq!(kinds, c.kinds, "{}", c.name);
        assert!(traj.rounds.len() <= 3, "{}", c.name);
        let called: Vec<_> = calls.iter().map(|(e, _)| e.name()).collect();
        assert_eq!(called, c.tools, "{}", c.name);
        assert_eq!(traj.final_answer, c.answer, "{}", c.name);
        assert_eq!(traj.invalid_count, c.invalid, "{}", c.name);
        assert_eq!(traj.is_well_formed(), c.well_formed, "{}", c.name);
        if let Some(last) = traj.rounds.get(2) {
            assert!(last.tool.is_none(), "{}: no tool call in round 3", c.name);
        }
        for (e, body) in &calls {
            match e {
                Endpoint::ImgAnn => assert_eq!(body, &serde_json::json!({ "img": q.image, "top_k": 3 })),
                Endpoint::TextAnn => assert_eq!(body["top_k"], 5),
                other => panic!("unexpected endpoint {other:?}"),
            }
        }
        assert_eq!(traj.searched_image, c.tools.contains(&"img_ann"), "{}", c.name);
        assert_eq!(traj.searched_text, c.tools.contains(&"text_ann"), "{}", c.name);
    }
}

#[test]
fn invalid_round_reissues_stage_prompt() {
    let c = cases().into_iter().find(|c| c.name == "invalid_then_answer").unwrap();
    let policy = stub(c.rules.clone(), None);
    rollout(&q01(), &policy, &RolloutOptions::default(), &fixture_tools(), &Prompts::builtin()).unwrap();
    let t = policy.transcript();
    let first = &t[0].messages[0].text;
    let reissued = &t[1].messages.last().unwrap().text;
    assert_eq!(first, reissued);
}

#[test]
fn observations_are_wrapped_and_errors_name_endpoint() {
    let c = cases().into_iter().find(|c| c.name == "image_text_answer").unwrap();
    let (traj, _) = run_case(&c);
    assert!(traj.rounds[0].observation.starts_with("<information>"));
    assert!(traj.rounds[0].observation.contains("[鸣潮] 合鸣·彻空冥雷"));
    assert_eq!(traj.rounds[0].observation.matches("(score: ").count(), 3);
    assert_eq!(traj.rounds[1].observation.matches("(score: ").count(), 5);

    let c = cases().into_iter().find(|c| c.name == "image_tool_failure").unwrap();
    let (traj, _) = run_case(&c);
    assert!(traj.rounds[0].observation.contains("检索失败（img_ann）"));
    assert!(!traj.rounds[0].tool_ok);
}

fn reward(name: &str, scheme: RewardScheme) -> f64 {
    let c = cases().into_iter().find(|c| c.name == name).unwrap();
    let (traj, _) = run_case(&c);
    let q = q01();
    compute_reward(&traj, &q.answer, &q.options, scheme, &RewardWeights::default()).unwrap().total
}

fn wrong_no_search() -> Vec<ScriptRule> {
    vec![rule(R1, WRONG)]
}

#[test]
fn reward_golden_values() {
    assert_eq!(reward("image_text_answer", RewardScheme::Original), 1.2);
    let policy = stub(wrong_no_search(), None);
    let traj = rollout(&q01(), &policy, &RolloutOptions::default(), &fixture_tools(), &Prompts::builtin()).unwrap();
    let q = q01();
    let w = RewardWeights::default();
    assert_eq!(compute_reward(&traj, &q.answer, &q.options, RewardScheme::Game, &w).unwrap().total, -0.4);
    assert_eq!(compute_reward(&traj, &q.answer, &q.options, RewardScheme::Original, &w).unwrap().total, 0.1);
    assert!(compute_reward(&traj, "5层", &q.options, RewardScheme::Original, &w).is_err());
}

#[test]
fn game_bonuses_and_tool_failure() {
    assert_eq!(reward("image_text_answer", RewardScheme::Game), 1.3);
    assert_eq!(reward("image_then_answer", RewardScheme::Game), 1.2);
    assert_eq!(reward("image_then_answer", RewardScheme::Original), 1.15);
    assert_eq!(reward("text_then_answer", RewardScheme::Game), 1.15);
    // failed search still counts as searching, so no penalty; no tool reward
    assert_eq!(reward("image_tool_failure", RewardScheme::Game), 0.1);
    assert_eq!(reward("invalid_three_times", RewardScheme::Game), -0.5);
    assert_eq!(reward("repeated_image_search", RewardScheme::Original), 1.05);
}

#[test]
fn game_and_original_differ_only_in_penalty_and_bonus() {
    for c in cases() {
        let o = reward(c.name, RewardScheme::Original);
        let g = reward(c.name, RewardScheme::Game);
        let d = g - o;
        assert!((-0.5 - 1e-9..=0.1 + 1e-9).contains(&d), "{}: {d}", c.name);
        assert!((-0.5..=1.3).contains(&g), "{}", c.name);
        assert!((0.0..=1.2).contains(&o), "{}", c.name);
    }
}

#[test]
fn advantage_golden_values() {
    let a = normalize_advantages(&[1.0, 0.0, 1.0, 0.0]).unwrap();
    for (x, y) in a.iter().zip([1.0, -1.0, 1.0, -1.0]) {
        assert!((x - y).abs() < 1e-9);
    }
    assert_eq!(normalize_advantages(&[0.7, 0.7, 0.7]).unwrap(), vec![0.0; 3]);
    assert!(normalize_advantages(&[1.0]).is_err());
    assert!(normalize_advantages(&[]).is_err());
}

#[test]
fn group_rollout_uses_per_sample_seeds() {
    let rules = vec![
        rule(AFTER_TEXT, RIGHT),
        ScriptRule { replies: vec![RIGHT.into(), WRONG.into()], reply: None, ..rule(AFTER_IMG, "") },
        ScriptRule { replies: vec![IMG.into(), TEXT.into(), WRONG.into()], reply: None, ..rule(R1, "") },
    ];
    let policy = stub(rules, None);
    let opts = RolloutOptions { decode: DecodeSpec::sample(0.8, 7), ..RolloutOptions::default() };
    let q = q01();
    let run = || {
        rollout_group(&q, 8, &policy, &opts, &fixture_tools(), &Prompts::builtin(), RewardScheme::Game, &RewardWeights::default())
            .unwrap()
    };
    let a = run();
    let b = run();
    assert_eq!(a, b);
    assert_eq!(a.len(), 8);
    assert!(a.iter().enumerate().all(|(i, r)| r.sample == i && r.id == "q01"));
    let totals: Vec<f64> = a.iter().map(|r| r.reward.total).collect();
    let expect = normalize_advantages(&totals).unwrap();
    assert_eq!(a.iter().map(|r| r.advantage).collect::<Vec<_>>(), expect);
    let distinct: std::collections::BTreeSet<String> = a.iter().map(|r| format!("{:?}", r.trajectory.rounds)).collect();
    assert!(distinct.len() > 1);
    assert!(rollout_group(&q, 1, &policy, &opts, &fixture_tools(), &Prompts::builtin(), RewardScheme::Game, &RewardWeights::default()).is_err());
}

fn oracle_advantages(r: &[f64]) -> Vec<f64> {
    let n = r.len() as f64;
    let mean = r.iter().sum::<f64>() / n;
    let sd = (r.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
    if sd == 0.0 {
        return vec![0.0; r.len()];
    }
    r.iter().map(|x| (x - mean) / sd).collect()
}

fn action() -> impl Strategy<Value = Action> {
    let text = "[a-zA-Z0-9 一二三雷电层]{0,12}".prop_map(|s| s.trim().to_string());
    prop_oneof![
        text.clone().prop_map(Action::Answer),
        Just(Action::ImageSearch),
        text.prop_filter("non-empty", |s| !s.is_empty()).prop_map(Action::TextSearch),
    ]
}

proptest! {
    #[test]
    fn advantages_are_standardized(r in prop::collection::vec(-2.0f64..2.0, 2..16)) {
        let a = normalize_advantages(&r).unwrap();
        let o = oracle_advantages(&r);
        for (x, y) in a.iter().zip(&o) {
            prop_assert!((x - y).abs() < 1e-6);
        }
        let n = a.len() as f64;
        let mean = a.iter().sum::<f64>() / n;
        prop_assert!(mean.abs() < 1e-9);
        if o.iter().any(|x| *x != 0.0) {
            let sd = (a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            prop_assert!((sd - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn advantages_are_shift_and_scale_invariant(
        r in prop::collection::vec(-2.0f64..2.0, 2..10), shift in -3.0f64..3.0, scale in 0.5f64..4.0
    ) {
        let a = normalize_advantages(&r).unwrap();
        let moved: Vec<f64> = r.iter().map(|x| x * scale + shift).collect();
        let b = normalize_advantages(&moved).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn parse_render_round_trip(a in action(), reason in "[a-z 分析]{0,10}") {
        let text = format!("<reason>{reason}</reason>{}", render_action(&a));
        prop_assert_eq!(parse_action(&text), a.clone());
        if let Action::Answer(ans) = &a {
            prop_assert_eq!(&extract_answer(&text), ans);
        }
    }

    #[test]
    fn two_actions_are_invalid(a in action(), b in action()) {
        let text = format!("{}{}", render_action(&a), render_action(&b));
        prop_assert_eq!(parse_action(&text), Action::Invalid);
    }
}
