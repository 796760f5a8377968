"""Regenerates the restaurant grid, detection log, the 41-order scenario and
a one-order scenario whose detection fails once.

The event trace is scripted: four orders get a wrong-item detection and
seven get a detection miss that the robot recovers from by asking for help.
"""
import json
import random
from pathlib import Path

HERE = Path(__file__).parent
RES = 0.05
W, H = 180, 120  # 9 m x 6 m

TABLES = [
    # kitchen counter first so it becomes table_0
    ((1.0, 4.8), (1.4, 0.6, 0.9)),
    ((3.2, 1.5), (0.8, 0.8, 0.7)),
    ((5.4, 1.5), (0.8, 0.8, 0.7)),
    ((7.6, 1.5), (0.8, 0.8, 0.7)),
    ((4.3, 4.2), (0.8, 0.8, 0.7)),
    ((6.7, 4.2), (0.8, 0.8, 0.7)),
]
ZONES = [
    {"name": "kitchen", "p1": {"x": 0.0, "y": 3.5}, "p2": {"x": 2.5, "y": 6.0}},
    {"name": "dining area", "p1": {"x": 2.5, "y": 0.0}, "p2": {"x": 9.0, "y": 6.0}},
]
MENU = ["cola", "orange juice", "apple juice", "green tea", "cookies", "potato chips"]
PHRASES = [
    "Could you bring me {a} {item}?",
    "Can I have {a} {item}, please?",
    "I'd like {a} {item}.",
    "Could I get {a} {item}?",
    "Please bring {a} {item} to our table.",
    "I would like to order {a} {item}.",
]
CHATS = [
    "What do you have?",
    "Hello! You are a very polite robot.",
    "Can you recommend something?",
    "Thank you, that was quick.",
    "What's on the menu today?",
]
WRONG_ITEM = {6, 15, 24, 33}
DETECT_MISS = {3, 9, 12, 19, 27, 31, 38}


def article(item):
    if item in ("cookies", "potato chips"):
        return "some"
    return "an" if item[0] in "aeiou" else "a"


def grid():
    rows = []
    for r in range(H):
        y = (r + 0.5) * RES
        row = []
        for c in range(W):
            x = (c + 0.5) * RES
            wall = c == 0 or r == 0 or c == W - 1 or r == H - 1
            plant = 8.4 <= x <= 8.8 and 5.2 <= y <= 5.8
            row.append("#" if wall or plant else ".")
        rows.append("".join(row))
    return f"gridmap v1 {W} {H} {RES} 0 0\n" + "\n".join(rows) + "\n"


def frames(rng):
    out = []
    for f in range(3):
        dets = []
        for (x, y), (w, d, h) in TABLES:
            jx, jy, jyaw = (0.0, 0.0, 0.0) if f == 0 else (
                round(rng.uniform(-0.02, 0.02), 3),
                round(rng.uniform(-0.02, 0.02), 3),
                round(rng.uniform(-0.02, 0.02), 3),
            )
            dets.append({
                "class_name": "table",
                "center": {"x": x + jx, "y": y + jy, "z": h / 2},
                "dims": {"w": w, "d": d, "h": h},
                "yaw": jyaw,
            })
        out.append({"frame_id": f, "detections": dets})
    return out


def main():
    rng = random.Random(7)
    det_frames = frames(rng)
    (HERE / "restaurant.grid").write_text(grid())
    log = {"frames": det_frames, "kitchen": "table_0", "zones": ZONES}
    (HERE / "restaurant_detections.json").write_text(json.dumps(log, indent=2) + "\n")

    events = []
    t = 0.0
    for fr in det_frames:
        events.append({"t": t, "type": "detections", **fr})
        t += 0.5
    people = [
        ((3.2, 0.8), "sitting", "Mr. Smith", {"gender": "male", "clothing": "a T-shirt", "gesture": "waving"}),
        ((4.3, 4.9), "sitting", None, {"gender": "female", "clothing": "a green dress"}),
        ((8.2, 3.0), "standing", None, {"clothing": "a black jacket"}),
    ]
    for k, ((x, y), action, name, attrs) in enumerate(people):
        obs = {"position": {"x": x, "y": y, "z": 0.0}, "action": action, "attributes": attrs, "frame_id": 3 + k}
        if name:
            obs["name"] = name
        events.append({"t": t, "type": "human_obs", "observation": obs})
        t += 0.5

    callers = [1, 3, 5, 2, 4]
    chats = iter(CHATS)
    for i in range(41):
        table = f"table_{callers[i % 5]}"
        item = MENU[(i * 5 + i // 6) % len(MENU)]
        text = PHRASES[i % len(PHRASES)].format(a=article(item), item=item)
        if i in WRONG_ITEM:
            events.append({"t": t, "type": "fault", "skill": "detect_wrong_item", "trigger": 0})
        if i in DETECT_MISS:
            events.append({"t": t, "type": "fault", "skill": "detect", "trigger": 0})
        events.append({"t": t, "type": "call", "table": table})
        events.append({"t": t + 2.0, "type": "utterance", "table": table, "text": text})
        t += 30.0
        if i % 9 == 4:
            chat_table = f"table_{callers[(i + 2) % 5]}"
            events.append({"t": t, "type": "call", "table": chat_table})
            events.append({"t": t + 2.0, "type": "utterance", "table": chat_table, "text": next(chats)})
            t += 20.0

    scenario = {
        "_note": "Scripted trace: 41 orders, 4 wrong-item detections, 7 detection misses recovered by a hand-over.",
        "world": {
            "grid": "restaurant.grid",
            "environment": "a small restaurant with a kitchen counter and five customer tables",
            "zones": ZONES,
            "menu": {"items": [{"name": m} for m in MENU]},
            "kitchen_table": "table_0",
            "stock": {m: 12 for m in MENU},
            "robot_start": {"x": 1.5, "y": 1.0, "theta": 0.0},
        },
        "events": events,
    }
    (HERE / "restaurant_41.json").write_text(json.dumps(scenario, indent=2) + "\n")

    t = events[len(det_frames) - 1]["t"] + 0.5
    bypass = {
        "world": scenario["world"],
        "events": events[: len(det_frames)] + [
            {"t": t, "type": "fault", "skill": "detect", "trigger": 0},
            {"t": t, "type": "call", "table": "table_3"},
            {"t": t + 2.0, "type": "utterance", "table": "table_3", "text": "Could you bring me an orange juice?"},
        ],
    }
    (HERE / "bypass_detect.json").write_text(json.dumps(bypass, indent=2) + "\n")


if __name__ == "__main__":
    main()
