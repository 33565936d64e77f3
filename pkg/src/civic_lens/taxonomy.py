"""Label space for public-comment classification.

Two dimensions are tracked for every comment: the *local concern* (a
governance activity a city could act on) and the *societal concern* (a broad
concern about wellbeing).  Each dimension has a top-10 subset that gets its
own binary detector; the remaining values only ever surface as "other".
"""
from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Union

ACTION_COMMENT = "action_comment"
LOCAL_GATE = "local_gate"
SOCIETAL_GATE = "societal_gate"
GATES = (ACTION_COMMENT, LOCAL_GATE, SOCIETAL_GATE)


class _Concern(enum.Enum):
    """Shared behaviour for both concern enumerations.

    Member values are ``(key, display, top10, definition)``; the enum value
    used for serialization is the snake_case key.
    """

    def __new__(cls, key, display, top10, definition, aliases=()):
        obj = object.__new__(cls)
        obj._value_ = key
        obj.display = display
        obj.top10 = top10
        obj.definition = definition
        obj.aliases = tuple(aliases)
        return obj

    @property
    def key(self) -> str:
        return self.value

    @classmethod
    def parse(cls, name: str):
        """Resolve a key, display name or alias (case/punctuation-insensitive)."""
        wanted = _fold(name)
        for member in cls:
            names = (member.key, member.display, member.name) + member.aliases
            if any(_fold(n) == wanted for n in names):
                return member
        raise ValueError(f"unknown {cls.__name__}: {name!r}")

    @classmethod
    def top10_members(cls):
        return tuple(m for m in cls if m.top10)


def _fold(name: str) -> str:
    name = name.replace("&", " and ")
    return re.sub(r"[^0-9a-z]+", "", name.lower())


class LocalConcern(_Concern):
    ELECTION_ADMINISTRATION_AND_APPOINTMENTS = (
        "election_administration_and_appointments",
        "Election administration and Appointments",
        True,
        "An explicit mention of voting, election administration, or appointments of "
        "government positions. For example, there may be explicit mentions of the term "
        '"voting procedures" or "impeachment".',
        ("Election Administration & Voting", "Election administration and Voting"),
    )
    HOUSING = (
        "housing",
        "Housing",
        True,
        "An explicit mention of the availability of housing, or construction around "
        "housing. Any mention of zoning around housing would be tagged as zoning.",
    )
    LOCAL_ECONOMY = (
        "local_economy",
        "Local economy",
        True,
        "An explicit mention of the local economy. For example, workforce education and "
        "development and business attractions and siting.",
    )
    POLICING = ("policing", "Policing", True, "An explicit mention of policing.")
    PUBLIC_SERVICE = (
        "public_service",
        "Public service",
        True,
        "An explicit mention of the provision of public services by the local "
        "government. For example, a specific service from the government, including but "
        "not limited to legal services, finance/accounting services, human resource "
        "services, social services (assistance towards particular groups), and health "
        "services.",
    )
    PUBLIC_SPACES_PARKS_RECREATION = (
        "public_spaces_parks_recreation",
        "Public spaces and Parks and recreation",
        True,
        "An explicit mention of public spaces. For example, parks, squares, public "
        "artworks, or public trails. Also an explicit mention of services provided by "
        "parks and recreation departments.",
    )
    PUBLIC_WORKS = (
        "public_works",
        "Public works",
        True,
        "An explicit mention of construction/installation, alteration, demolition, "
        "repair, and maintenance of local infrastructures. This is distinct from "
        "construction around non-public housing projects for example.",
    )
    TRANSIT_CORRIDORS_AND_PARKING = (
        "transit_corridors_and_parking",
        "Transit corridors and parking",
        True,
        "An explicit mention of local transit corridors and parking lots.",
    )
    UTILITY_SERVICE = (
        "utility_service",
        "Utility service",
        True,
        "An explicit mention of utility services, such as electricity, water, natural "
        "gas, waste management, and sewer services.",
    )
    ZONING_AND_REZONING = (
        "zoning_and_rezoning",
        "Zoning and rezoning",
        True,
        "An explicit mention of zoning and rezoning. This may or may not pertain to "
        "housing.",
        ("Zoning and rezoning and land use", "Zoning & Rezoning"),
    )
    EVENTS_AND_CULTURE = (
        "events_and_culture",
        "Events and culture",
        False,
        "An explicit mention of city events or cultural projects such as public art, "
        "parades, and local festivals.",
    )
    FIRE_SERVICE = ("fire_service", "Fire service", False, "An explicit mention of fire services.")
    LIBRARY_SERVICE = (
        "library_service",
        "Library service",
        False,
        "An explicit mention of library services.",
    )
    TRANSPORTATION = (
        "transportation",
        "Transportation",
        False,
        "An explicit mention of mobility or traffic.",
    )


class SocietalConcern(_Concern):
    AFFORDABILITY = (
        "affordability",
        "Affordability",
        True,
        "Concerns/awareness about the ability of individuals or households to meet their "
        "essential living expenses in the city within their income level without undue "
        "financial strain. These living expenses can be related to housing, food, "
        "healthcare, transportation, utilities, and education.",
    )
    ANTI_RACISM = (
        "anti_racism",
        "Anti-racism",
        True,
        "Concerns/awareness about racial inequality and/or advocates for policies, "
        "practices, and attitudes that promote racial equity and justice.",
    )
    FUNCTIONAL_DEMOCRACY = (
        "functional_democracy",
        "Functional democracy",
        True,
        "Concerns about the principles of democratic governance including city charters "
        "and state constitutions, transparency, accountability, efficiency, and "
        "responsiveness of the local government.",
    )
    HOMELESSNESS = (
        "homelessness",
        "Homelessness",
        True,
        "Concerns/awareness around homelessness either in the city or more broadly. "
        "Homelessness may be brought up in the context of mental health and/or public "
        "services around this particularly vulnerable population.",
    )
    INCARCERATION_AND_CRIME_HISTORY = (
        "incarceration_and_crime_history",
        "Incarceration and crime history",
        True,
        "Concerns/awareness of mass incarceration, and discrimination against citizens "
        "with a crime history. Especially for job opportunities, rental applications, "
        "and mental health care.",
    )
    PUBLIC_HEALTH = (
        "public_health",
        "Public health",
        True,
        "Concerns/awareness around public health. Public health may be brought up in the "
        "context of community health (sometimes around environmental risks), local "
        "accessibility to physical and mental health resources, or the government's "
        "readiness to respond to public health crises.",
    )
    PUBLIC_SAFETY = (
        "public_safety",
        "Public safety",
        True,
        "Concerns about criminal activities or other areas of emergencies, accidents, "
        "and hazards.",
    )
    QUALITY_OF_BUILT_ENVIRONMENT = (
        "quality_of_built_environment",
        "Quality of the built environment",
        True,
        "Concerns about the quality of local buildings, public spaces, transit "
        "corridors, and other manmade infrastructure.",
    )
    SENIOR_INFANT_CHILD_TEENAGER_CARE = (
        "senior_infant_child_teenager_care",
        "Senior, infant, child, and teenager care",
        True,
        "Concerns/awareness of the safety, well-being, and rights of the elderly, "
        "infants, children, and teenagers.",
        ("Senior/infant/child/and teenager care",),
    )
    SUSTAINABILITY = (
        "sustainability",
        "Sustainability",
        True,
        "Concerns/awareness for the health and preservation of the natural environment. "
        "May be brought up around issues of climate change, emission and pollution, "
        "renewable energy, sustainable development, green space preservation, "
        "biodiversity, and ecosystem health.",
    )
    COMMERCE_AND_JOBS = (
        "commerce_and_jobs",
        "Commerce and jobs",
        False,
        "Concerns / awareness around the ability of the local economy to support the "
        "municipality. For example, explicit concerns about local commerce and jobs that "
        "focus on supporting small businesses, creating and increasing access to local "
        "employment opportunities, and fostering economic growth within communities by "
        "promoting entrepreneurship, investing in infrastructure, and addressing "
        "barriers such as zoning laws or access to capital.",
    )
    CULTURE = (
        "culture",
        "Culture",
        False,
        "Concerns about the culture of a municipality or community. For example, "
        "concerns that a local culture is being threatened or calls to preserve or "
        "respect the culture of a place or community.",
    )
    DISABILITY_ISSUES = (
        "disability_issues",
        "Disability issues",
        False,
        "Concerns/awareness of the safety, wellbeing, and rights of people with "
        "disabilities.",
    )
    EDUCATION = (
        "education",
        "Education",
        False,
        "Concerns about accessibility, quality, affordability, and inequality of "
        "education. This also includes discussions around education outcomes, budget "
        "and resource allocation, education policies, teaching technology integration, "
        "parent and community involvement, and content of education materials.",
    )
    GENDER_ISSUES = (
        "gender_issues",
        "Gender issues",
        False,
        "Concerns/awareness around gender inequality, feminism, or LGBTQIA+ issues.",
    )
    NATURAL_ENVIRONMENT_AND_HUMAN_ACTIVITY = (
        "natural_environment_and_human_activity",
        "Natural environment and human activity",
        False,
        "Concerns about the quality or hazards (natural disasters) of the environment, "
        "such as lakes, rivers, and forests. Also concerns about public green spaces. In "
        "contrast to the sustainability category, here we expect speakers to emphasize "
        "the effect of the natural environment on human wellbeing, rather than focus the "
        "frame on the wellbeing of the environment.",
    )


TOP_LOCAL: tuple[LocalConcern, ...] = LocalConcern.top10_members()
TOP_SOCIETAL: tuple[SocietalConcern, ...] = SocietalConcern.top10_members()
LOCAL_KEYS = tuple(c.key for c in TOP_LOCAL)
SOCIETAL_KEYS = tuple(c.key for c in TOP_SOCIETAL)

Concern = Union[LocalConcern, SocietalConcern]


def label_columns() -> list[str]:
    """Binary targets in canonical order: 3 gates, 10 local, 10 societal."""
    return [*GATES, *LOCAL_KEYS, *SOCIETAL_KEYS]


def display(concern: Concern) -> str:
    return concern.display


def parse_concern(name: str) -> Concern:
    """Parse a concern name from either dimension."""
    for cls in (LocalConcern, SocietalConcern):
        try:
            return cls.parse(name)
        except ValueError:
            pass
    raise ValueError(f"unknown concern: {name!r}")


class AssignmentKind(str, enum.Enum):
    CONCERNS = "concerns"
    OTHER = "other"
    NONE = "none"


@dataclass(frozen=True)
class Assignment:
    """Aggregated concern label for one dimension of one comment.

    ``kind`` is CONCERNS (with a non-empty ``concerns`` set drawn from the
    top-10), OTHER (gate fired, no top-10 detector did) or NONE (gate off).
    """

    dimension: str  # "local" | "societal"
    kind: AssignmentKind
    concerns: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.dimension not in ("local", "societal"):
            raise ValueError(f"bad dimension {self.dimension!r}")
        if self.kind is AssignmentKind.CONCERNS and not self.concerns:
            raise ValueError("a concern-set assignment cannot be empty")
        if self.kind is not AssignmentKind.CONCERNS and self.concerns:
            raise ValueError(f"{self.kind.value} assignment carries no concerns")
        allowed = set(TOP_LOCAL if self.dimension == "local" else TOP_SOCIETAL)
        stray = set(self.concerns) - allowed
        if stray:
            raise ValueError(f"not top-10 {self.dimension} concerns: {sorted(c.key for c in stray)}")

    @property
    def keys(self) -> list[str]:
        """Concern keys in canonical taxonomy order."""
        order = LOCAL_KEYS if self.dimension == "local" else SOCIETAL_KEYS
        present = {c.key for c in self.concerns}
        return [k for k in order if k in present]

    def categories(self) -> list[str]:
        """Row/column labels this assignment contributes to in a co-occurrence table."""
        if self.kind is AssignmentKind.CONCERNS:
            return self.keys
        return [self.kind.value]

    def to_json(self):
        if self.kind is AssignmentKind.CONCERNS:
            return self.keys
        return f"{'other' if self.kind is AssignmentKind.OTHER else 'no'}_{self.dimension}_concern"

    @classmethod
    def from_json(cls, dimension: str, value) -> "Assignment":
        if isinstance(value, list):
            enum_cls = LocalConcern if dimension == "local" else SocietalConcern
            return cls(dimension, AssignmentKind.CONCERNS, frozenset(enum_cls.parse(v) for v in value))
        if value == f"other_{dimension}_concern":
            return cls(dimension, AssignmentKind.OTHER)
        if value == f"no_{dimension}_concern":
            return cls(dimension, AssignmentKind.NONE)
        raise ValueError(f"bad {dimension} assignment: {value!r}")


# Alias names that mirror the two label domains.
LocalAssignment = Assignment
SocietalAssignment = Assignment


def taxonomy_dict() -> dict:
    def rows(members: Iterable[_Concern]):
        return [
            {"key": m.key, "display": m.display, "top10": m.top10, "definition": m.definition,
             "aliases": list(m.aliases)}
            for m in members
        ]

    return {"local": rows(LocalConcern), "societal": rows(SocietalConcern)}


def export_taxonomy(path) -> None:
    Path(path).write_text(json.dumps(taxonomy_dict(), indent=2) + "\n", encoding="utf-8")
