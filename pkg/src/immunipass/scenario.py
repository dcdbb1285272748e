"""``.scenario`` scripts: parse, validate and replay them against a fresh registry.

Grammar, one directive per line (``#`` starts a comment, tokens are
shell-quoted, ``key=value`` tokens are parameters)::

    name <scenario-name>                     optional; defaults to the file stem
    profile Baseline|Hardened                exactly once
    authorities <n> <t>                      default 3 2
    anchor-mode salted|sealed                Hardened anchor form, default salted
    start <timestamp>                        logical clock origin
    step <seconds>                           clock advance per action, default 60

    register hospital|patient|verifier <name>
    issue <hospital> <patient> IgM=<bool> IgG=<bool> givenName=.. familyName=.. birthDate=YYYY-MM-DD photo=<text>
    anchor <patient>
    challenge <verifier> <patient>
    present <patient> <verifier>
    verify <verifier>                        [expect=accept|reject] [reason=<Reason>]
    advance <N>d|<N>h|<N>m|<N>s
    attack dictionary <patient> unknown=f1,f2 [from=YYYY-MM-DD] [to=YYYY-MM-DD]
    attack replay from=<verifier> to=<verifier> [strategy=verbatim|fresh_challenge]
    attack tamper <patient> mutation=<Mutation> [verifier=auto|Strict|Permissive] [foreign=<patient>]
    attack correlate

Any action accepts ``expect=``; attacks take ``success``, ``failure`` or
``auto`` (the outcome the profile is meant to produce), and any action may
``expect=error``.
"""

from __future__ import annotations

import re
import shlex
import time
from dataclasses import dataclass, field, replace
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import Any

from . import canonical
from .attacks import (
    FLAGS,
    AttackReport,
    ClaimTemplate,
    DateRange,
    Mutation,
    PublicContext,
    correlation_attack,
    dictionary_attack,
    expected_success,
    replay_attack,
    signature_tamper_attack,
)
from .canonical import SeededEntropy, digest, format_datetime, parse_date, parse_datetime, to_hex
from .credential import VerifyProfile
from .did import Resolver
from .errors import ActionFailure, PassportError, ScriptParseError
from .protocol import (
    ActorKind,
    AnchorMode,
    Consortium,
    Presentation,
    Profile,
    anchor_credential,
    issue_challenge,
    issue_test_result,
    present,
    register_actor,
    verify_presentation,
)
from .registry import RegistryChain, public_event_log

DEFAULT_START = canonical.utc(2021, 3, 1, 9, 0, 0)
BIRTHDATE_DOMAIN = (date(1900, 1, 1), date(2020, 12, 31))

_KNOWN_VERBS = {"register", "issue", "anchor", "challenge", "present", "verify", "advance", "attack"}
_ATTACKS = {"dictionary", "replay", "tamper", "correlate"}
_DURATION_RE = re.compile(r"(\d+)([dhms])\Z")
_NAME_RE = re.compile(r"[A-Za-z0-9._-]+\Z")


@dataclass(frozen=True)
class Action:
    verb: str
    args: tuple[str, ...]
    params: dict[str, str]
    line: int
    text: str

    @property
    def expect(self) -> str | None:
        return self.params.get("expect")


@dataclass(frozen=True)
class ScenarioScript:
    name: str
    profile: Profile
    authorities: int
    quorum: int
    anchor_mode: AnchorMode
    start: datetime
    step: timedelta
    actions: tuple[Action, ...]


def _split(line: str, lineno: int) -> tuple[list[str], dict[str, str]]:
    try:
        tokens = shlex.split(line, comments=True)
    except ValueError as exc:
        raise ScriptParseError(str(exc), lineno) from None
    args, params = [], {}
    for tok in tokens:
        key, sep, value = tok.partition("=")
        if sep and key:
            params[key] = value
        else:
            args.append(tok)
    return args, params


def parse_duration(text: str) -> timedelta:
    m = _DURATION_RE.match(text)
    if not m:
        raise ValueError(f"bad duration {text!r}")
    n, unit = int(m.group(1)), m.group(2)
    return timedelta(**{{"d": "days", "h": "hours", "m": "minutes", "s": "seconds"}[unit]: n})


def parse_script(text: str, name: str = "scenario") -> ScenarioScript:
    settings: dict[str, Any] = {"name": name, "authorities": 3, "quorum": 2, "anchor_mode": AnchorMode.SALTED,
                                "start": DEFAULT_START, "step": timedelta(seconds=60)}
    profile = None
    actions: list[Action] = []
    actors: dict[str, ActorKind] = {}

    def need(actor: str, kind: ActorKind, lineno: int) -> None:
        if actors.get(actor) is not kind:
            raise ScriptParseError(f"{actor!r} is not a registered {kind.value}", lineno)

    for lineno, raw in enumerate(text.splitlines(), 1):
        args, params = _split(raw, lineno)
        if not args:
            continue
        head, rest = args[0], args[1:]
        try:
            if head == "name":
                settings["name"] = rest[0]
            elif head == "profile":
                if profile is not None:
                    raise ScriptParseError("profile given twice", lineno)
                profile = Profile(rest[0])
            elif head == "authorities":
                settings["authorities"], settings["quorum"] = int(rest[0]), int(rest[1])
                if not 1 <= settings["quorum"] <= settings["authorities"]:
                    raise ScriptParseError("quorum must satisfy 1 <= t <= n", lineno)
            elif head == "anchor-mode":
                settings["anchor_mode"] = AnchorMode(rest[0])
            elif head == "start":
                settings["start"] = parse_datetime(rest[0])
            elif head == "step":
                settings["step"] = timedelta(seconds=int(rest[0]))
            elif head in _KNOWN_VERBS:
                _validate_action(head, rest, params, actors, need, lineno)
                actions.append(Action(head, tuple(rest), params, lineno, raw.split("#")[0].strip()))
            else:
                raise ScriptParseError(f"unknown directive {head!r}", lineno)
        except ScriptParseError:
            raise
        except (IndexError, ValueError, PassportError) as exc:
            raise ScriptParseError(f"{head}: {exc}", lineno) from None
    if profile is None:
        raise ScriptParseError("script declares no profile")
    return ScenarioScript(profile=profile, actions=tuple(actions), **settings)


def _validate_action(verb, args, params, actors, need, lineno) -> None:
    if verb == "register":
        kind, name = ActorKind(args[0]), args[1]
        if not _NAME_RE.match(name):
            raise ScriptParseError(f"actor name {name!r} must match [A-Za-z0-9._-]+", lineno)
        if name in actors:
            raise ScriptParseError(f"{name!r} registered twice", lineno)
        actors[name] = kind
    elif verb == "issue":
        need(args[0], ActorKind.HOSPITAL, lineno)
        need(args[1], ActorKind.PATIENT, lineno)
        for key in ("IgM", "IgG", "givenName", "familyName", "birthDate"):
            if key not in params:
                raise ScriptParseError(f"issue needs {key}=", lineno)
        _flag(params["IgM"]), _flag(params["IgG"]), parse_date(params["birthDate"])
    elif verb == "anchor":
        need(args[0], ActorKind.PATIENT, lineno)
    elif verb == "challenge":
        need(args[0], ActorKind.VERIFIER, lineno)
        need(args[1], ActorKind.PATIENT, lineno)
    elif verb == "present":
        need(args[0], ActorKind.PATIENT, lineno)
        need(args[1], ActorKind.VERIFIER, lineno)
    elif verb == "verify":
        need(args[0], ActorKind.VERIFIER, lineno)
    elif verb == "advance":
        parse_duration(args[0])
    elif verb == "attack":
        name = args[0]
        if name not in _ATTACKS:
            raise ScriptParseError(f"unknown attack {name!r}", lineno)
        if name in ("dictionary", "tamper"):
            need(args[1], ActorKind.PATIENT, lineno)
        if name == "dictionary":
            for f in params.get("unknown", "").split(","):
                if f not in ("birthDate", "IgM", "IgG"):
                    raise ScriptParseError(f"no enumerable domain for {f!r}", lineno)
        if name == "replay":
            need(params.get("from", ""), ActorKind.VERIFIER, lineno)
            need(params.get("to", ""), ActorKind.VERIFIER, lineno)
        if name == "tamper":
            Mutation(params.get("mutation", ""))
            if "foreign" in params:
                need(params["foreign"], ActorKind.PATIENT, lineno)
    expect = params.get("expect")
    if expect is not None and expect not in ("accept", "reject", "success", "failure", "auto", "error", "ok"):
        raise ScriptParseError(f"unknown expectation {expect!r}", lineno)


def _flag(text: str) -> bool:
    if text not in ("true", "false"):
        raise ValueError(f"flag must be true or false, got {text!r}")
    return text == "true"


@dataclass
class ActionOutcome:
    index: int
    action: Action
    outcome: str
    expected: str | None
    matched: bool
    detail: str = ""
    elapsed: float = 0.0


@dataclass
class RunReport:
    script: ScenarioScript
    seed: int
    chain: RegistryChain
    outcomes: list[ActionOutcome] = field(default_factory=list)
    attacks: list[tuple[int, AttackReport, str | None, bool]] = field(default_factory=list)
    ground_truth: list[tuple[Any, Any, datetime]] = field(default_factory=list)
    wall_clock: float = 0.0

    @property
    def ok(self) -> bool:
        return all(o.matched for o in self.outcomes)

    @property
    def chain_bytes(self) -> bytes:
        return self.chain.dumps()

    @property
    def chain_digest(self) -> str:
        return to_hex(digest(self.chain_bytes))


class ScenarioRun:
    """Mutable interpreter state for one script execution."""

    def __init__(self, script: ScenarioScript, seed: int = 0):
        self.script = script
        self.profile = script.profile
        self.entropy = SeededEntropy(seed)
        self.consortium = Consortium.generate(script.authorities, script.quorum, self.entropy)
        self.chain = self.consortium.genesis()
        self.now = script.start
        self.hospitals: dict[str, Any] = {}
        self.patients: dict[str, Any] = {}
        self.verifiers: dict[str, Any] = {}
        self.challenges: dict[tuple[str, str], Any] = {}
        self.inbox: dict[str, Presentation] = {}
        self.issued_by: dict[str, Any] = {}
        self.report = RunReport(script, seed, self.chain)

    # each handler returns (outcome, detail) or raises
    def do_register(self, a: Action):
        kind, name = ActorKind(a.args[0]), a.args[1]
        actor, self.chain = register_actor(kind, name, self.chain, self.consortium, self.now, self.entropy)
        {ActorKind.HOSPITAL: self.hospitals, ActorKind.PATIENT: self.patients, ActorKind.VERIFIER: self.verifiers}[kind][name] = actor
        return "ok", str(actor.did)

    def do_issue(self, a: Action):
        hospital, patient = self.hospitals[a.args[0]], self.patients[a.args[1]]
        p = a.params
        photo = bytes.fromhex(p["image"]) if "image" in p else digest(p.get("photo", f"{p['givenName']} {p['familyName']}").encode())
        identity = {"givenName": p["givenName"], "familyName": p["familyName"], "birthDate": parse_date(p["birthDate"]), "image": photo}
        vc = issue_test_result(hospital, patient.did, identity, _flag(p["IgM"]), _flag(p["IgG"]), self.now, self.entropy)
        self.patients[a.args[1]] = replace(patient, credential=vc, anchor_mode=None, anchor_secret=None)
        self.issued_by[a.args[1]] = hospital.did
        return "ok", vc.body.id

    def do_anchor(self, a: Action):
        holder = self.patients[a.args[0]]
        if holder.credential is None:
            raise PassportError(f"{a.args[0]} holds no credential to anchor")
        mode = AnchorMode(a.params.get("mode", self.script.anchor_mode.value))
        holder, self.chain = anchor_credential(holder, holder.credential, self.profile, self.chain,
                                               self.consortium, self.now, mode, self.entropy)
        self.patients[a.args[0]] = holder
        self.report.ground_truth.append((holder.did, self.issued_by[a.args[0]], self.now))
        return "ok", f"{holder.anchor_mode.value} anchor at block {len(self.chain.blocks) - 1}"

    def do_challenge(self, a: Action):
        verifier = self.verifiers[a.args[0]]
        ch = issue_challenge(verifier, self.profile, self.now, self.entropy)
        self.challenges[(a.args[0], a.args[1])] = ch
        return "ok", f"nonce {ch.nonce.hex()} {'signed' if ch.verifier_signature else 'unsigned'}"

    def do_present(self, a: Action):
        patient, vname = a.args[0], a.args[1]
        verifier = self.verifiers[vname]
        ch = self.challenges.get((vname, patient))
        pres = present(self.patients[patient], verifier.did, ch, self.profile, now=self.now, resolver=Resolver(self.chain))
        self.inbox[vname] = pres
        return "ok", "holder proof attached" if pres.holder_proof else "bare credential"

    def do_verify(self, a: Action):
        verifier = self.verifiers[a.args[0]]
        if a.args[0] not in self.inbox:
            raise PassportError(f"nothing was presented to {a.args[0]}")
        decision = verify_presentation(verifier, self.inbox.pop(a.args[0]), self.chain, self.now, self.profile)
        outcome = "accept" if decision.accepted else "reject"
        detail = " ".join(f"{n}={'pass' if ok else 'FAIL'}" for n, ok in decision.checks)
        if not decision.accepted:
            detail = f"{decision.verdict.reason} {detail}"
        return outcome, detail

    def do_advance(self, a: Action):
        self.now += parse_duration(a.args[0])
        return "ok", format_datetime(self.now)

    def do_attack(self, a: Action):
        name = a.args[0]
        if name == "dictionary":
            report = self._dictionary(a)
        elif name == "replay":
            src, dst = self.verifiers[a.params["from"]], self.verifiers[a.params["to"]]
            if not src.retained:
                raise PassportError(f"{a.params['from']} never saw a presentation")
            captured = Presentation.loads(src.retained[-1].dumps())
            report = replay_attack(captured, dst, self.chain, self.now, self.profile,
                                   strategy=a.params.get("strategy", "verbatim"), entropy=self.entropy)
        elif name == "tamper":
            report = self._tamper(a)
        else:
            public = RegistryChain.loads(self.chain.dumps())
            report = correlation_attack(public_event_log(public), self.report.ground_truth)
        return ("success" if report.succeeded else "failure"), report

    def _dictionary(self, a: Action) -> AttackReport:
        holder = self.patients[a.args[1]]
        if holder.credential is None:
            raise PassportError(f"{a.args[1]} holds no credential")
        public = RegistryChain.loads(self.chain.dumps())
        anchors = public.anchors_for(holder.did)
        if not anchors:
            raise PassportError(f"no anchor on chain for {holder.did}")
        unknown_names = a.params["unknown"].split(",")
        lo = parse_date(a.params["from"]) if "from" in a.params else BIRTHDATE_DOMAIN[0]
        hi = parse_date(a.params["to"]) if "to" in a.params else BIRTHDATE_DOMAIN[1]
        domains = {"birthDate": DateRange(lo, hi), "IgM": FLAGS, "IgG": FLAGS}
        claims = holder.credential.body.claims
        template = ClaimTemplate(
            known={k: v for k, v in claims.items() if k not in unknown_names},
            unknown={k: domains[k] for k in unknown_names},
        )
        context = PublicContext.from_document(PublicContext.from_credential(holder.credential).to_document())
        return dictionary_attack(anchors[-1][2], template, context, public)

    def _tamper(self, a: Action) -> AttackReport:
        holder = self.patients[a.args[1]]
        verifier_profile = a.params.get("verifier", "auto")
        if verifier_profile == "auto":
            verifier_profile = VerifyProfile.PERMISSIVE if self.profile is Profile.BASELINE else VerifyProfile.STRICT
        foreign = self.patients[a.params["foreign"]].credential if "foreign" in a.params else None
        return signature_tamper_attack(holder.credential, a.params["mutation"], verifier_profile, Resolver(self.chain),
                                       foreign=foreign, registry=self.chain, now=self.now)

    def _expected(self, a: Action) -> str | None:
        expect = a.expect
        if expect == "auto":
            if a.verb != "attack":
                return None
            name = a.args[0]
            if name == "tamper":
                vp = a.params.get("verifier", "auto")
                permissive = vp == "Permissive" or (vp == "auto" and self.profile is Profile.BASELINE)
                good = permissive and a.params["mutation"] != Mutation.REATTACH_FOREIGN_PROOF.value
                return "success" if good else "failure"
            return "success" if expected_success(name, self.profile) else "failure"
        return expect

    def step(self, index: int, a: Action) -> ActionOutcome:
        self.now += self.script.step
        expected = self._expected(a)
        t0 = time.perf_counter()
        try:
            outcome, detail = getattr(self, f"do_{a.verb}")(a)
        except PassportError as exc:
            if expected != "error":
                raise ActionFailure(index, f"{a.text}: {exc}") from exc
            outcome, detail = "error", f"{type(exc).__name__}: {exc}"
        elapsed = time.perf_counter() - t0
        if isinstance(detail, AttackReport):
            matched = expected is None or expected == outcome
            self.report.attacks.append((index, detail, expected, matched))
            detail = detail.narrative
        elif expected is None:
            matched = outcome in ("ok", "accept")
        else:
            matched = expected == outcome or (expected == "ok" and outcome == "ok")
            reason = a.params.get("reason")
            if reason and outcome == "reject" and not detail.startswith(reason):
                matched = False
        result = ActionOutcome(index, a, outcome, expected, matched, detail, elapsed)
        self.report.outcomes.append(result)
        return result

    def run(self) -> RunReport:
        t0 = time.perf_counter()
        for index, action in enumerate(self.script.actions):
            self.step(index, action)
        self.report.chain = self.chain
        self.report.wall_clock = time.perf_counter() - t0
        return self.report


def load_script(path: str | Path) -> ScenarioScript:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScriptParseError(f"cannot read {path}: {exc}") from None
    return parse_script(text, name=path.stem)


def resolve_script_path(path: str | Path) -> Path:
    """A file path, or the name of a shipped scenario with or without its extension."""
    p = Path(path)
    if p.exists():
        return p
    from .fixtures import scenario_path

    name = str(path) if str(path).endswith(".scenario") else f"{path}.scenario"
    shipped = scenario_path(name)
    if shipped.is_file():
        return Path(str(shipped))
    raise ScriptParseError(f"no such scenario file {path}")


def run_scenario(script: ScenarioScript | str | Path, seed: int = 42, out: str | Path | None = None,
                 figures: bool = False, profile: Profile | str | None = None) -> RunReport:
    """Execute a script against a fresh registry; optionally write its artifacts to ``out``."""
    if not isinstance(script, ScenarioScript):
        script = load_script(resolve_script_path(script))
    if profile is not None:
        script = replace(script, profile=Profile(profile))
    report = ScenarioRun(script, seed).run()
    if out is not None:
        from .report import write_artifacts

        write_artifacts(report, Path(out), figures=figures)
    return report
