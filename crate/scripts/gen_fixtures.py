#!/usr/bin/env python3
"""Generate the three household map fixtures under fixtures/.

Each environment has three rooms with one room-level partition per room.
Label and item totals per environment are fixed; item placement is drawn
from a seeded RNG so the output is reproducible.

    python3 scripts/gen_fixtures.py
"""

import json
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "fixtures"

# Labels present in every room, with the same instance count per room.
SHARED = ["lightswitch", "ceilinglamp", "wallpictureframe", "powersocket",
          "door", "window", "curtains", "rug"]

KITCHEN = [
    "stove", "fridge", "microwave", "sink", "faucet", "kitchencounter",
    "kitchencabinet", "kitchentable", "coffeemaker", "toaster", "dishwasher",
    "mug", "cup", "plate", "dishbowl", "fryingpan", "cookingpot", "knife",
    "fork", "spoon", "cuttingboard", "breadslice", "milk", "juice", "egg",
    "apple", "banana", "cereal", "salmon", "chicken", "carrot", "potato",
    "tomato", "onion", "lemon", "dishwashingliquid", "sponge", "trashcan",
    "oventray", "stovefan", "wineglass", "waterglass", "bottlewater",
    "condimentbottle", "salt", "pepper", "kettle", "blender", "rag",
    "spatula", "teabag", "sugar", "butter", "cheese", "pancake",
]

LIVING = [
    "sofa", "tv", "tvstand", "remotecontrol", "coffeetable", "bookshelf",
    "magazine", "desk", "computer", "keyboard", "mouse", "cpuscreen",
    "radio", "clock", "vase", "plant", "candle", "boardgame", "guitar",
    "speaker", "cellphone", "dvdplayer", "armchair", "newspaper",
    "photoframe", "printer", "paper", "pen", "folder", "headset",
    "videogame", "fireplace",
]

BEDROOM = [
    "bed", "nightstand", "closet", "clothespants", "clothesshirt", "hanger",
    "alarmclock", "slippers", "mirror", "dresser", "perfume", "hairproduct",
    "deodorant", "laundrybasket", "blanket", "jewelry", "wardrobe",
    "clothessocks", "bedsidelamp", "hairbrush",
]

# Labels that show up in two rooms.
TWO_ROOM = {
    "chair": ("kitchen", "livingroom"),
    "book": ("livingroom", "bedroom"),
    "pillow": ("livingroom", "bedroom"),
    "tablelamp": ("livingroom", "bedroom"),
    "towel": ("kitchen", "bedroom"),
    "washingmachine": ("kitchen", "bedroom"),
}

# Labels referenced by the activity programs; every environment keeps them.
PROGRAM_LABELS = {
    "fridge", "milk", "stove", "fryingpan", "plate", "kitchentable", "sofa",
    "tv", "bed", "juice", "remotecontrol", "computer", "keyboard", "sink",
    "faucet", "dishwashingliquid", "sponge", "mug", "coffeemaker",
    "kitchencounter", "rag", "coffeetable", "magazine", "bookshelf",
    "closet", "clothesshirt", "laundrybasket", "washingmachine", "blanket",
    "pillow", "book", "nightstand", "cup", "dishwasher", "trashcan",
    "newspaper", "armchair", "chair", "desk", "clothespants", "bedsidelamp",
}

ENVS = [
    # name, labels, items, room layout (name, x0, x1, y0, y1), seed
    ("env0", 115, 443, [("kitchen", 0.0, 6.0, 0.0, 5.0),
                        ("livingroom", 6.0, 13.0, 0.0, 5.0),
                        ("bedroom", 13.0, 18.0, 0.0, 5.0)], 11),
    ("env1", 98, 357, [("livingroom", 0.0, 7.5, 0.0, 6.0),
                       ("kitchen", 7.5, 12.0, 0.0, 6.0),
                       ("bedroom", 0.0, 12.0, 6.0, 10.0)], 23),
    ("env2", 100, 324, [("bedroom", 0.0, 5.0, 0.0, 4.5),
                        ("kitchen", 5.0, 10.5, 0.0, 4.5),
                        ("livingroom", 5.0, 10.5, 4.5, 11.0)], 37),
]

HEIGHT = 2.8

# Labels that commonly have many instances.
MULTI = {"mug", "cup", "plate", "dishbowl", "fork", "spoon", "knife",
         "wineglass", "waterglass", "kitchencabinet", "book", "magazine",
         "chair", "pillow", "clothesshirt", "clothespants", "hanger",
         "plant", "candle", "apple", "banana", "egg", "potato", "tomato",
         "carrot", "onion", "paper", "pen", "folder", "condimentbottle",
         "breadslice", "clothessocks", "photoframe", "towel", "rag",
         "cellphone", "teabag"}


def pick_labels(rng, n_labels):
    """Select exactly n_labels labels: all shared and program labels first."""
    home = {}
    for lbl in KITCHEN:
        home[lbl] = ("kitchen",)
    for lbl in LIVING:
        home[lbl] = ("livingroom",)
    for lbl in BEDROOM:
        home[lbl] = ("bedroom",)
    for lbl, rooms in TWO_ROOM.items():
        home[lbl] = rooms
    for lbl in SHARED:
        home[lbl] = ("kitchen", "livingroom", "bedroom")
    required = set(SHARED) | PROGRAM_LABELS
    optional = sorted(set(home) - required)
    rng.shuffle(optional)
    chosen = sorted(required) + optional[: n_labels - len(required)]
    assert len(chosen) == n_labels, (len(chosen), n_labels, len(home))
    return {lbl: home[lbl] for lbl in chosen}


def instance_plan(rng, labels, n_items):
    """List of (label, room) pairs with exactly n_items entries."""
    plan = []
    for lbl, rooms in sorted(labels.items()):
        for room in rooms:
            plan.append((lbl, room))
    multi = sorted(l for l in labels if l in MULTI and l not in SHARED)
    while len(plan) < n_items:
        lbl = rng.choice(multi)
        room = rng.choice(labels[lbl])
        plan.append((lbl, room))
    assert len(plan) == n_items, (len(plan), n_items)
    return plan


def make_env(name, n_labels, n_items, layout, seed):
    rng = random.Random(seed)
    labels = pick_labels(rng, n_labels)
    plan = instance_plan(rng, labels, n_items)
    rooms = {r[0]: r for r in layout}
    out_rooms = [{"name": r[0], "min": [r[1], r[3], 0.0],
                  "max": [r[2], r[4], HEIGHT]} for r in layout]
    partitions = [{"id": i, "name": r[0], "room_index": i,
                   "min": [r[1], r[3], 0.0], "max": [r[2], r[4], HEIGHT]}
                  for i, r in enumerate(layout)]
    items = []
    for idx, (lbl, room) in enumerate(plan):
        _, x0, x1, y0, y1 = rooms[room]
        hx = round(rng.uniform(0.05, 0.6), 2)
        hy = round(rng.uniform(0.05, 0.6), 2)
        hz = round(rng.uniform(0.05, 0.5), 2)
        cx = round(rng.uniform(x0 + hx + 0.05, x1 - hx - 0.05), 2)
        cy = round(rng.uniform(y0 + hy + 0.05, y1 - hy - 0.05), 2)
        cz = round(rng.uniform(hz, HEIGHT - hz), 2)
        items.append({
            "id": idx + 1,
            "label": lbl,
            "position": [cx, cy, cz],
            "min": [round(cx - hx, 2), round(cy - hy, 2), round(cz - hz, 2)],
            "max": [round(cx + hx, 2), round(cy + hy, 2), round(cz + hz, 2)],
        })
    doc = {"rooms": out_rooms, "items": items, "partitions": partitions}
    path = OUT / f"{name}.map.json"
    path.write_text(json.dumps(doc, indent=1) + "\n")
    print(f"{path.name}: {len(labels)} labels, {len(items)} items")


def main():
    OUT.mkdir(exist_ok=True)
    for env in ENVS:
        make_env(*env)


if __name__ == "__main__":
    main()
