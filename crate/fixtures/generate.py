#!/usr/bin/env python3
"""Writes the small deterministic fixture corpus used by tests and the CLI examples.

Image vectors are synthetic (D=8): each core element owns one axis and its gallery
images and query frames sit near that axis. Text vectors are not written here; they
come from `framesearch index embed` so they match the service-side query embedder.
"""

import json
import random
from pathlib import Path

HERE = Path(__file__).resolve().parent
DIM = 8

ELEMENTS = [
    {
        "name": "合鸣·彻空冥雷",
        "game": "鸣潮",
        "chunks": [
            ("合鸣·彻空冥雷 套装效果", "合鸣·彻空冥雷 2件套：导电伤害提升10%。5件套：施放重击或共鸣技能后获得导电伤害增益，每层提升15%，最多可叠加2层，持续15秒。"),
            ("合鸣·彻空冥雷 获取方式", "合鸣·彻空冥雷 声骸可在无音区的首领挑战中获取，推荐搭配导电属性角色。"),
            ("合鸣·彻空冥雷 搭配建议", "彻空冥雷 适合以重击为主要输出手段的导电角色，主词条优先选择导电伤害加成。"),
        ],
        "knowledge": "合鸣·彻空冥雷：5件套的导电伤害增益最多叠加2层，每层15%，持续15秒。",
    },
    {
        "name": "CS:GO Dust II",
        "game": "CS:GO",
        "chunks": [
            ("Dust II 地图概览", "CS:GO Dust2 地图 有A点和B点两个炸弹区，A点可经由A大长廊或A小进入。"),
            ("Dust II 中路", "Dust2 中路 连接T方出生点与CT方，中门是双方争夺视野的关键位置。"),
            ("Dust II B点", "Dust2 B点 位于B洞之后，防守方常在B门附近架枪。"),
        ],
        "knowledge": "CS:GO Dust II：经典爆破地图，包含A、B两个炸弹区，A大长廊是进攻A点的主要路线。",
    },
    {
        "name": "雷电将军",
        "game": "原神",
        "chunks": [
            ("雷电将军 角色资料", "原神 雷电将军 为雷元素角色，使用长柄武器，所属地区为稻妻。"),
            ("雷电将军 元素爆发", "雷电将军 元素爆发 名为奥义·梦想真说，会根据愿力层数提升伤害。"),
            ("雷电将军 元素战技", "雷电将军 元素战技 神变·恶曜开眼 为队伍角色提供元素爆发伤害加成。"),
        ],
        "knowledge": "雷电将军：稻妻的雷元素长柄武器角色，元素爆发为奥义·梦想真说。",
    },
    {
        "name": "薙草之稻光",
        "game": "原神",
        "chunks": [
            ("薙草之稻光 武器资料", "原神 薙草之稻光 为五星长柄武器，副属性为元素充能效率。"),
            ("薙草之稻光 特效", "薙草之稻光 特效会将超出100%部分的元素充能效率按比例转化为攻击力。"),
        ],
        "knowledge": "薙草之稻光：五星长柄武器，副属性为元素充能效率。",
    },
    {
        "name": "无尽之刃",
        "game": "王者荣耀",
        "chunks": [
            ("无尽之刃 装备属性", "王者荣耀 无尽之刃 提供物理攻击和暴击率，被动提升暴击效果。"),
            ("无尽之刃 合成路线", "无尽之刃 由暴风巨剑合成，是射手常用的暴击核心装备。"),
        ],
        "knowledge": "无尽之刃：射手暴击核心装备，被动提升暴击效果。",
    },
    {
        "name": "永恒之城诺克史黛拉",
        "game": "艾尔登法环",
        "chunks": [
            ("永恒之城诺克史黛拉 背景", "艾尔登法环 永恒之城诺克史黛拉 位于地下，曾因触怒大卢恩而遭流星毁灭。"),
            ("诺克史黛拉 区域", "诺克史黛拉 地下区域 有夜空般的穹顶，可通过希芙拉河井前往。"),
        ],
        "knowledge": "永恒之城诺克史黛拉：地下之城，曾遭流星毁灭，可经希芙拉河前往。",
    },
]

DISTRACTORS = [
    ("原神 稻妻 地区", "稻妻 是原神中的雷之国度，由多个岛屿组成。"),
    ("鸣潮 声骸系统", "鸣潮 声骸 可装配在角色身上，相同套装达到件数后触发套装效果。"),
    ("CS:GO Mirage 地图", "CS:GO Mirage 地图 同样有A点与B点，中路连接两侧。"),
    ("王者荣耀 射手装备", "王者荣耀 射手 通常优先购买攻速与暴击类装备。"),
    ("艾尔登法环 大卢恩", "艾尔登法环 大卢恩 是半神持有的力量碎片。"),
    ("游戏 界面 小地图", "多数游戏的小地图位于屏幕角落，用于显示玩家位置。"),
]

# Empty-query gallery images all sit near this axis; instances framed near it take the
# fallback path of the element vote.
UNLABELLED_AXIS = 6

# (element index or None, question, options, answer, category, difficulty, answer-bearing phrase)
INSTANCES = [
    (0, "该机制5件套效果最多可叠加几层导电伤害增益？", ["1层", "2层", "3层", "4层"], "2层", "Mech.", "Med.", "最多可叠加2层"),
    (0, "该套装2件套提供哪种伤害加成？", ["冷凝伤害", "导电伤害", "热熔伤害", "气动伤害"], "导电伤害", "Mech.", "Easy", "导电伤害提升10%"),
    (0, "5件套增益每层提升多少导电伤害？", ["5%", "10%", "15%", "20%"], "15%", "Mech.", "Hard", "每层提升15%"),
    (1, "画面中的地图有几个炸弹区？", ["1个", "2个", "3个", "4个"], "2个", "Map", "Easy", "有A点和B点两个炸弹区"),
    (1, "进攻A点的主要长廊叫什么？", ["A大长廊", "B洞", "中门", "警家"], "A大长廊", "Map", "Med.", "经由A大长廊"),
    (1, "图中地图的中门主要作用是什么？", ["购买装备", "争夺视野", "安放炸弹", "复活队友"], "争夺视野", "Map", "Hard", "中门是双方争夺视野"),
    (2, "画面中的角色属于哪种元素？", ["火元素", "水元素", "雷元素", "冰元素"], "雷元素", "Char.", "Easy", "雷元素角色"),
    (2, "该角色的元素爆发叫什么？", ["奥义·梦想真说", "神变·恶曜开眼", "天街巡游", "诸愿百眼之轮"], "奥义·梦想真说", "Char.", "Med.", "名为奥义·梦想真说"),
    (2, "该角色来自哪个地区？", ["蒙德", "璃月", "稻妻", "须弥"], "稻妻", "Story", "Hard", "所属地区为稻妻"),
    (3, "图中武器属于哪种类型？", ["单手剑", "长柄武器", "法器", "弓"], "长柄武器", "Equip.", "Easy", "五星长柄武器"),
    (3, "这把武器的副属性是什么？", ["暴击率", "攻击力", "元素充能效率", "元素精通"], "元素充能效率", "Equip.", "Med.", "副属性为元素充能效率"),
    (3, "该武器特效把什么转化为攻击力？", ["生命值", "元素充能效率", "防御力", "暴击伤害"], "元素充能效率", "Equip.", "Hard", "按比例转化为攻击力"),
    (4, "画面中的装备主要提升哪项属性？", ["法术攻击", "暴击", "生命值", "移速"], "暴击", "Equip.", "Easy", "被动提升暴击效果"),
    (4, "该装备由哪件装备合成？", ["暴风巨剑", "铁剑", "匕首", "贪婪之噬"], "暴风巨剑", "Equip.", "Med.", "由暴风巨剑合成"),
    (4, "该装备最适合哪类英雄？", ["坦克", "法师", "射手", "辅助"], "射手", "Other", "Hard", "射手常用的暴击核心装备"),
    (5, "画面中的城市因何被毁灭？", ["洪水", "流星", "瘟疫", "战争"], "流星", "Story", "Med.", "遭流星毁灭"),
    (5, "这座城市位于哪里？", ["天空", "地下", "海底", "雪山"], "地下", "Story", "Easy", "位于地下"),
    (5, "通往该城市的路线经过哪里？", ["希芙拉河", "盖利德", "宁姆格福", "利耶尼亚"], "希芙拉河", "Map", "Hard", "希芙拉河井"),
    (None, "多数游戏的小地图通常位于屏幕哪里？", ["屏幕中央", "屏幕角落", "屏幕底部中央", "不显示"], "屏幕角落", "Other", "Easy", "小地图位于屏幕角落"),
    (None, "同类套装效果在鸣潮中如何触发？", ["随机触发", "达到件数后触发", "每日首次登录", "击败首领"], "达到件数后触发", "Other", "Med.", "达到件数后触发套装效果"),
]


def noisy(rng, axis, scale):
    v = [rng.gauss(0.0, scale) for _ in range(DIM)]
    v[axis] += 1.0
    return [round(x, 6) for x in v]


def dump(path, rows):
    with open(path, "w", encoding="utf-8") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")


def main():
    rng = random.Random(20241015)

    chunks = []
    for ei, e in enumerate(ELEMENTS):
        for ci, (title, content) in enumerate(e["chunks"]):
            chunks.append({"chunk_id": f"c{ei + 1}_{ci + 1}", "title": title, "content": content})
    for di, (title, content) in enumerate(DISTRACTORS):
        chunks.append({"chunk_id": f"d{di + 1}", "title": title, "content": content})
    dump(HERE / "text_chunks.jsonl", chunks)

    gallery, image_vectors = [], []
    for ei, e in enumerate(ELEMENTS):
        for i in range(5):
            pid = f"g{ei + 1}_{i + 1}"
            gallery.append({"pid": pid, "img": f"gallery/{pid}.jpg", "query": e["name"], "game": e["game"]})
            image_vectors.append({"id": pid, "vector": noisy(rng, ei, 0.05)})
    for i in range(5):
        pid = f"u{i + 1}"
        gallery.append({"pid": pid, "img": f"gallery/{pid}.jpg", "query": "", "game": ""})
        image_vectors.append({"id": pid, "vector": noisy(rng, UNLABELLED_AXIS, 0.03)})
    dump(HERE / "gallery.jsonl", gallery)
    dump(HERE / "image_vectors.jsonl", image_vectors)

    multimodal = []
    for ei, e in enumerate(ELEMENTS):
        title, content = e["chunks"][0]
        multimodal.append({
            "id": f"m{ei + 1}",
            "title": title,
            "content": content,
            "source_query": e["name"],
            "source_best_img": f"gallery/g{ei + 1}_1.jpg",
        })
    dump(HERE / "multimodal.jsonl", multimodal)

    dump(HERE / "kn_part_1.jsonl", [
        {"query": ELEMENTS[0]["name"], "content": ELEMENTS[0]["knowledge"]},
        {"query": ELEMENTS[1]["name"], "content": ELEMENTS[1]["knowledge"]},
        {"query": ELEMENTS[2]["name"], "content": ELEMENTS[2]["knowledge"]},
    ])
    dump(HERE / "kn_part_2.jsonl", [
        {"query": ELEMENTS[1]["name"], "content": "CS:GO Dust II：中门是双方争夺视野的关键位置。"},
        {"query": ELEMENTS[3]["name"], "content": ELEMENTS[3]["knowledge"]},
        {"query": ELEMENTS[4]["name"], "content": ELEMENTS[4]["knowledge"]},
        {"query": ELEMENTS[5]["name"], "content": ELEMENTS[5]["knowledge"]},
    ])

    dataset, frames = [], []
    for n, (ei, q, opts, ans, cat, diff, _) in enumerate(INSTANCES, start=1):
        qid = f"q{n:02d}"
        image = f"frames/{qid}.jpg"
        axis = UNLABELLED_AXIS if ei is None else ei
        frames.append({"id": image, "vector": noisy(rng, axis, 0.08)})
        inst = {
            "id": qid,
            "image": image,
            "question": q,
            "options": opts,
            "answer": ans,
            "rationale": f"依据检索到的资料，正确答案为{ans}。",
            "category": cat,
            "difficulty": diff,
            "metadata": {"title": "" if ei is None else ELEMENTS[ei]["game"], "cover_ocr": "", "asr": ""},
        }
        if ei is not None:
            inst["gold_element"] = ELEMENTS[ei]["name"]
        dataset.append(inst)
    dump(HERE / "dataset.jsonl", dataset)
    dump(HERE / "query_images.jsonl", frames)

    write_stub(HERE / "stub_gateway.toml")


def rx(s):
    return "".join("\\" + c if c in r"\.^$|?*+()[]{}" else c for c in s)


def toml_str(s):
    return json.dumps(s, ensure_ascii=False)


def write_stub(path):
    rules = []

    def rule(when, reply, scope="latest"):
        rules.append((when, reply, scope))

    # Answerer: the evidence must carry the answer-bearing phrase.
    for _, q, _, ans, _, _, phrase in INSTANCES:
        rule(["只输出正确选项的完整文本", rx(q), rx(phrase)], ans)
    rule(["只输出正确选项的完整文本"], "无法确定")

    # Planner: image search, then text search, then answer.
    def decision(tool, can=False):
        return json.dumps({"can_answer_now": can, "selected_tool": tool, "bm25_query": "",
                           "reason": "按轮次执行", "confidence": 0.5}, ensure_ascii=False)
    rule(["检索规划器", r"当前轮次：1/"], decision("img_ann"))
    rule(["检索规划器", r"当前轮次：2/"], decision("text_ann"))
    rule(["检索规划器"], decision("none", can=True))
    rule(["候选知识查询"], json.dumps([e["name"] for e in ELEMENTS], ensure_ascii=False))

    # Policy: final answers once the text observation carries the phrase.
    for _, q, _, ans, _, _, phrase in INSTANCES:
        rule(["你已经完成文本搜索", rx(q), rx(phrase)],
             f"<reason>检索结果支持该答案</reason><answer>{ans}</answer>", scope="transcript")
    rule(["你已经完成文本搜索"], "<reason>证据不足</reason><answer>无法确定</answer>")
    for e in ELEMENTS:
        rule(["你已经完成了一轮图搜", rx(e["name"])],
             f"<reason>图搜确认元素为{e['name']}</reason><text_search>{e['name']}</text_search>")
    rule(["你已经完成了一轮图搜"], "<reason>元素不明，直接检索问题</reason><text_search>游戏 小地图 套装效果</text_search>")
    rule(["合法动作只有三种"], "<reason>需要先确认图中元素</reason><search><img></search>")

    lines = [
        "# Scripted replies for the planner, answerer and search policy roles.",
        "# Generated by generate.py; rules are tried in order and the first match wins.",
        'kind = "stub"',
        'default = "无法确定"',
        "",
    ]
    for when, reply, scope in rules:
        lines.append("[[rules]]")
        lines.append("when = [" + ", ".join(toml_str(w) for w in when) + "]")
        if scope != "latest":
            lines.append(f'scope = "{scope}"')
        lines.append(f"reply = {toml_str(reply)}")
        lines.append("")
    path.write_text("\n".join(lines), encoding="utf-8")


if __name__ == "__main__":
    main()
