"""Requirement dataset parsing, validation, fold splitting and synthetic generation.

Datasets are 4-column CSV files (``id,text,conflict,conflict_label``) where
``conflict`` is Yes/No and ``conflict_label`` is either ``No`` or
``Yes (id[,id]*)`` naming the conflicting partner requirements.
"""

from __future__ import annotations

import csv
import io
import json
import random
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable

CSV_HEADER = ["id", "text", "conflict", "conflict_label"]

_LABEL_RE = re.compile(r"^\s*Yes\s*\(([^()]+)\)\s*$", re.IGNORECASE)


class CorpusError(ValueError):
    """Raised when a requirement dataset fails validation.

    ``diagnostics`` holds one human-readable message per violation, each
    carrying the offending row number where applicable.
    """

    def __init__(self, diagnostics: list[str]):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


@dataclass(frozen=True)
class Requirement:
    id: str
    text: str
    gold_conflict: bool
    partners: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.text.strip():
            raise CorpusError([f"requirement {self.id!r}: empty text"])
        if self.gold_conflict != bool(self.partners):
            raise CorpusError(
                [f"requirement {self.id!r}: conflict flag inconsistent with partner list"]
            )


@dataclass
class RequirementSet:
    name: str
    requirements: list[Requirement]

    def __post_init__(self):
        diags = validate_requirements(self.requirements)
        if diags:
            raise CorpusError(diags)
        self._by_id = {r.id: r for r in self.requirements}

    def __len__(self) -> int:
        return len(self.requirements)

    def __iter__(self):
        return iter(self.requirements)

    def __getitem__(self, rid: str) -> Requirement:
        return self._by_id[rid]

    def __contains__(self, rid: str) -> bool:
        return rid in self._by_id

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self.requirements]

    def gold_labels(self) -> dict[str, bool]:
        return {r.id: r.gold_conflict for r in self.requirements}


def validate_requirements(requirements: Iterable[Requirement]) -> list[str]:
    """Return all dataset-level violations (unique ids, symmetry, dangling ids)."""
    reqs = list(requirements)
    diags: list[str] = []
    seen: dict[str, int] = {}
    for row, r in enumerate(reqs, start=1):
        if r.id in seen:
            diags.append(f"row {row}: duplicate id {r.id!r} (first seen at row {seen[r.id]})")
        else:
            seen[r.id] = row
    by_id = {r.id: r for r in reqs}
    for row, r in enumerate(reqs, start=1):
        for p in r.partners:
            if p == r.id:
                diags.append(f"row {row}: requirement {r.id!r} lists itself as a partner")
            elif p not in by_id:
                diags.append(f"row {row}: partner id {p!r} of {r.id!r} does not exist")
            elif r.id not in by_id[p].partners:
                other_row = next(i for i, q in enumerate(reqs, start=1) if q.id == p)
                diags.append(
                    f"rows {row} and {other_row}: asymmetric labels, {r.id!r} lists "
                    f"{p!r} but {p!r} does not list {r.id!r}"
                )
    return diags


def _parse_label_cell(cell: str, conflict_cell: str, row: int) -> tuple[bool, tuple[str, ...]]:
    conflict_cell = conflict_cell.strip().lower()
    cell = cell.strip()
    if conflict_cell not in ("yes", "no"):
        raise CorpusError([f"row {row}: conflict column must be Yes or No, got {conflict_cell!r}"])
    if cell.lower() == "no":
        if conflict_cell == "yes":
            raise CorpusError([f"row {row}: conflict=Yes but conflict_label=No"])
        return False, ()
    m = _LABEL_RE.match(cell)
    if not m:
        raise CorpusError([f"row {row}: malformed conflict_label cell {cell!r}"])
    if conflict_cell == "no":
        raise CorpusError([f"row {row}: conflict=No but conflict_label names partners"])
    partners = tuple(p.strip() for p in m.group(1).split(","))
    if any(not p for p in partners):
        raise CorpusError([f"row {row}: empty partner id in conflict_label cell {cell!r}"])
    return True, partners


def parse_requirements(raw: bytes | str, name: str = "dataset") -> RequirementSet:
    """Parse and fully validate a CSV requirement dataset.

    Raises CorpusError carrying every violation found, each with its row number.
    """
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    reader = csv.reader(io.StringIO(raw))
    try:
        header = next(reader)
    except StopIteration:
        raise CorpusError(["empty file"]) from None
    if [h.strip().lower() for h in header] != CSV_HEADER:
        raise CorpusError([f"row 1: expected header {','.join(CSV_HEADER)!r}, got {header!r}"])

    requirements: list[Requirement] = []
    diags: list[str] = []
    for row, cells in enumerate(reader, start=2):
        if not cells or (len(cells) == 1 and not cells[0].strip()):
            continue
        if len(cells) != 4:
            diags.append(f"row {row}: expected 4 columns, got {len(cells)}")
            continue
        rid, text, conflict, label = (c.strip() for c in cells)
        if not text:
            diags.append(f"row {row}: empty requirement text")
            continue
        try:
            gold, partners = _parse_label_cell(label, conflict, row)
            requirements.append(Requirement(rid, text, gold, partners))
        except CorpusError as e:
            diags.extend(e.diagnostics)
    diags.extend(validate_requirements(requirements))
    if diags:
        raise CorpusError(diags)
    return RequirementSet(name=name, requirements=requirements)


def serialize_requirements(reqset: RequirementSet) -> str:
    """CSV text such that parse(serialize(set)) round-trips exactly."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in reqset:
        label = f"Yes ({','.join(r.partners)})" if r.gold_conflict else "No"
        writer.writerow([r.id, r.text, "Yes" if r.gold_conflict else "No", label])
    return out.getvalue()


@dataclass
class FoldAssignment:
    n_folds: int
    assignment: dict[str, int]

    def fold_ids(self, fold: int) -> list[str]:
        return [rid for rid, f in self.assignment.items() if f == fold]

    def train_ids(self, test_fold: int) -> list[str]:
        return [rid for rid, f in self.assignment.items() if f != test_fold]


def conflict_components(reqset: RequirementSet) -> list[list[str]]:
    """Connected components of the partner graph, each sorted by id; singletons included."""
    visited: set[str] = set()
    components: list[list[str]] = []
    for r in reqset:
        if r.id in visited:
            continue
        stack = [r.id]
        comp = []
        while stack:
            rid = stack.pop()
            if rid in visited:
                continue
            visited.add(rid)
            comp.append(rid)
            stack.extend(reqset[rid].partners)
        components.append(sorted(comp))
    return components


def make_folds(reqset: RequirementSet, n_folds: int, seed: int) -> FoldAssignment:
    """Pair-preserving fold split: partner components are assigned atomically.

    Components are shuffled by seed, then placed largest-first onto the
    currently smallest fold, so balance is best-effort when a component
    exceeds the ideal fold size.
    """
    if n_folds < 2:
        raise ValueError(f"n_folds must be >= 2, got {n_folds}")
    components = conflict_components(reqset)
    rng = random.Random(seed)
    rng.shuffle(components)
    components.sort(key=len, reverse=True)  # stable: equal sizes keep shuffled order
    sizes = [0] * n_folds
    assignment: dict[str, int] = {}
    for comp in components:
        fold = min(range(n_folds), key=lambda i: (sizes[i], i))
        for rid in comp:
            assignment[rid] = fold
        sizes[fold] += len(comp)
    return FoldAssignment(n_folds=n_folds, assignment=assignment)


def _load_perturbations() -> dict:
    with resources.files("reqconflict.data").joinpath("perturbations.json").open("rb") as f:
        return json.load(f)


def _phrase_swaps(table: dict) -> list[tuple[str, str]]:
    swaps = []
    for a, b in table["unit_swaps"] + table["quantifier_swaps"]:
        swaps.append((a, b))
        swaps.append((b, a))
    return swaps


_NUMBER_RE = re.compile(r"\d+(?:\.\d+)?")


def _applicable_perturbations(text: str, swaps: list[tuple[str, str]]) -> list[tuple[str, str]]:
    """List of (kind, payload) perturbations applicable to text."""
    found: list[tuple[str, str]] = []
    lower = text.lower()
    for a, b in swaps:
        if re.search(rf"\b{re.escape(a)}\b", lower):
            found.append(("swap", f"{a}\t{b}"))
    if _NUMBER_RE.search(text):
        found.append(("number", ""))
    return found


def _apply_perturbation(text: str, kind: str, payload: str, rng: random.Random) -> str:
    if kind == "swap":
        a, b = payload.split("\t")
        return re.sub(rf"\b{re.escape(a)}\b", b, text, count=1, flags=re.IGNORECASE)
    # numeric change: scale the first number by a small factor
    m = _NUMBER_RE.search(text)
    assert m is not None
    value = float(m.group(0))
    factor = rng.choice([2, 3, 5, 10])
    new = value * factor
    rendered = str(int(new)) if new == int(new) else f"{new:g}"
    return text[: m.start()] + rendered + text[m.end() :]


def generate_synthetic(reqset: RequirementSet, n_conflicts: int, seed: int) -> RequirementSet:
    """Append ``n_conflicts`` perturbed copies of existing requirements.

    Each copy conflicts with its source (unit swap, quantifier swap or numeric
    change); output is deterministic given the seed and always validates.
    """
    if len(reqset) == 0:
        raise ValueError("cannot generate from an empty requirement set")
    if n_conflicts == 0:
        return RequirementSet(name=reqset.name, requirements=list(reqset.requirements))
    table = _load_perturbations()
    swaps = _phrase_swaps(table)
    perturbable = [r for r in reqset if _applicable_perturbations(r.text, swaps)]
    if n_conflicts > len(perturbable):
        raise ValueError(
            f"requested {n_conflicts} synthetic conflicts but only "
            f"{len(perturbable)} requirements are perturbable"
        )
    rng = random.Random(seed)
    sources = rng.sample(perturbable, n_conflicts)
    existing = set(reqset.ids)
    new_partners: dict[str, list[str]] = {}
    appended: list[Requirement] = []
    counter = 1
    for src in sources:
        while f"syn{counter}" in existing:
            counter += 1
        new_id = f"syn{counter}"
        existing.add(new_id)
        options = _applicable_perturbations(src.text, swaps)
        kind, payload = rng.choice(options)
        new_text = _apply_perturbation(src.text, kind, payload, rng)
        appended.append(Requirement(new_id, new_text, True, (src.id,)))
        new_partners.setdefault(src.id, []).append(new_id)

    updated: list[Requirement] = []
    for r in reqset:
        if r.id in new_partners:
            updated.append(
                Requirement(r.id, r.text, True, r.partners + tuple(new_partners[r.id]))
            )
        else:
            updated.append(r)
    return RequirementSet(name=reqset.name, requirements=updated + appended)


def load_bundled_dataset(name: str = "base_requirements.csv") -> RequirementSet:
    data = resources.files("reqconflict.data").joinpath(name).read_bytes()
    return parse_requirements(data, name=name.rsplit(".", 1)[0])
