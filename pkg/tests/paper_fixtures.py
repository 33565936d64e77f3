"""Per-city label fixtures rebuilt from the published per-city counts.

Counts per city: total comments, action comments, action comments with a
top-10 local concern, and mention counts per top-10 concern.  Local
mentions are dealt round-robin over the first ``top10_local`` action
comments, so every one of them carries at least one concern and each
concern keeps its exact count.  Societal mentions are dealt over all
action comments the same way.
"""
from civic_lens.cascade import LabelSet
from civic_lens.taxonomy import ACTION_COMMENT, LOCAL_GATE, SOCIETAL_GATE, label_columns

# key order used by the source table rows
LOCAL_ROW_ORDER = (
    "housing", "public_service", "election_administration_and_appointments", "utility_service", "policing",
    "public_works", "transit_corridors_and_parking", "public_spaces_parks_recreation", "zoning_and_rezoning",
    "local_economy",
)
SOCIETAL_ROW_ORDER = (
    "functional_democracy", "affordability", "public_safety", "quality_of_built_environment", "homelessness",
    "anti_racism", "sustainability", "senior_infant_child_teenager_care", "public_health",
    "incarceration_and_crime_history",
)

CITIES = {
    "Ann Arbor": dict(n=257, action=228, top10_local=178,
                      local=(29, 33, 6, 14, 26, 13, 38, 22, 39, 4),
                      societal=(37, 55, 38, 22, 4, 55, 29, 7, 11, 2)),
    "Alpena": dict(n=19, action=17, top10_local=14,
                   local=(1, 10, 0, 0, 1, 0, 1, 1, 3, 0),
                   societal=(3, 1, 1, 0, 1, 0, 0, 0, 1, 0)),
    "Cedar Springs": dict(n=51, action=46, top10_local=18,
                          local=(0, 13, 2, 1, 3, 1, 2, 1, 0, 0),
                          societal=(12, 0, 0, 1, 0, 0, 0, 7, 3, 0)),
    "Garden City": dict(n=47, action=45, top10_local=38,
                        local=(2, 17, 1, 8, 2, 8, 3, 3, 1, 1),
                        societal=(12, 3, 3, 7, 0, 0, 0, 6, 0, 0)),
    "Inkster": dict(n=148, action=76, top10_local=67,
                    local=(3, 21, 6, 12, 9, 14, 4, 3, 5, 9),
                    societal=(16, 5, 8, 23, 1, 1, 2, 22, 14, 0)),
    "Jackson": dict(n=198, action=174, top10_local=171,
                    local=(40, 29, 60, 23, 17, 16, 4, 11, 1, 5),
                    societal=(86, 41, 26, 11, 32, 29, 9, 8, 15, 8)),
    "Lansing": dict(n=193, action=181, top10_local=177,
                    local=(66, 70, 28, 6, 19, 11, 5, 11, 12, 7),
                    societal=(84, 19, 43, 20, 42, 11, 1, 12, 15, 37)),
}

# published per-city rows: column (1), column (4), columns (6) and (7)
EXPECTED = {
    "Ann Arbor": ("88.72", "78.07", ("zoning_and_rezoning",), ("affordability", "anti_racism")),
    "Alpena": ("89.47", "82.35", ("public_service",), ("functional_democracy",)),
    "Cedar Springs": ("90.20", "39.13", ("public_service",), ("functional_democracy",)),
    "Garden City": ("95.74", "84.44", ("public_service",), ("functional_democracy",)),
    "Inkster": ("51.35", "88.16", ("public_service",), ("quality_of_built_environment",)),
    "Jackson": ("87.88", "98.28", ("election_administration_and_appointments",), ("functional_democracy",)),
    "Lansing": ("93.78", "97.79", ("public_service",), ("functional_democracy",)),
}


def _deal(counts, order, n_slots):
    slots = [set() for _ in range(n_slots)]
    j = 0
    for key, c in zip(order, counts):
        for _ in range(c):
            slots[j % n_slots].add(key)
            j += 1
    return slots


def city_labels(city: str) -> list[LabelSet]:
    spec = CITIES[city]
    local = _deal(spec["local"], LOCAL_ROW_ORDER, spec["top10_local"])
    societal = _deal(spec["societal"], SOCIETAL_ROW_ORDER, spec["action"])
    out = []
    for i in range(spec["n"]):
        bits = dict.fromkeys(label_columns(), 0)
        if i < spec["action"]:
            bits[ACTION_COMMENT] = 1
            bits[LOCAL_GATE] = 1
            for k in (local[i] if i < spec["top10_local"] else ()):
                bits[k] = 1
            if societal[i]:
                bits[SOCIETAL_GATE] = 1
                for k in societal[i]:
                    bits[k] = 1
        out.append(LabelSet.from_bits(f"{city}-{i:03d}", bits))
    return out
