"""Acceptance suite: one test per criterion, each printing its own
pass/fail line. Run with `pytest tests/test_acceptance.py -v -s`."""

import itertools
import random

import pytest

from pnet.addressing import ScalingParams, parse_address, scaling_split
from pnet.core import (
    Agent,
    AgentKind,
    Polarity,
    Promise,
    PromiseGraph,
    body_set,
    find_bindings,
    give,
    use,
)
from pnet.dot import export_dot
from pnet.dsl import elaborate, parse_model, render_document
from pnet.policy import compile_policy, verify_compiled
from pnet.simulator import Message, flood_set, inject, reachable
from pnet.verifier import check_alignment, check_cooperation, expand_proxy, single_points_of_failure
from conftest import MODELS, model_text
from oracles import (
    check_dot,
    oracle_reachable,
    oracle_spof,
    random_graph,
    random_policy_spec,
)


def _report(criterion: str, ok: bool, detail: str = ""):
    flag = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"\nACCEPTANCE {criterion}: {flag}{suffix}")
    assert ok, f"{criterion} failed: {detail}"


def test_criterion_1_fig1_golden_trace():
    """Switch model reproduces the exact four-event trace; deleting the
    destination's accept promise drops by autonomy."""
    g = elaborate(parse_model(model_text("fig1-switch.pnet"))[0])
    addr = parse_address("mac:00:00:11:11:11:BB")
    trace = inject(g, "AA", Message(addr))
    golden = [("AA", "imposed"), ("SW", "accepted-any"),
              ("SW", "forwarded"), ("BB", "accepted")]
    exact = [(e.agent, e.action) for e in trace.events] == golden \
        and [e.hop for e in trace.events] == [0, 1, 2, 3]

    victim = next(p for p in g.promises if p.promiser == "BB"
                  and p.body.polarity is Polarity.USE)
    dropped = inject(g.without_promise(victim), "AA", Message(addr))
    autonomy = (not dropped.delivered
                and dropped.events[-1].action == "dropped-no-promise")
    _report("1 fig1-golden-trace", exact and autonomy)


def test_criterion_2_router_clause_coverage():
    """Attached, RIB-known and unknown prefixes terminate via forward
    clauses 1, 2, 3; the forward/−forward binding is reported."""
    g = elaborate(parse_model(model_text("fig2-router.pnet"))[0])
    scenarios = {"D": "forwarded-clause-1", "D2": "forwarded-clause-2",
                 "D3": "forwarded-clause-3"}
    clause_ok = True
    for dst, clause in scenarios.items():
        trace = inject(g, "S", Message(
            parse_address(f"prefix:{_prefix_of(g, dst)},local:{_local_of(g, dst)}")),
            require_final_at=dst)
        clause_ok &= trace.delivered and trace.final_agent == dst \
            and clause in trace.actions()
    bindings = {(b.giver_agent, b.user_agent) for b in find_bindings(g)
                if b.giver.body.kind == "forward" and b.user.body.kind == "forward"}
    binding_ok = {("R1", "I1"), ("R1", "I2"),
                  ("R2", "J1"), ("R2", "J2"), ("R2", "J3")} <= bindings
    _report("2 router-clause-coverage", clause_ok and binding_ok)


def _prefix_of(g, aid):
    return g.agent(aid).attr("prefix")


def _local_of(g, aid):
    return g.agent(aid).attr("local")


def test_criterion_3_scaling_identity():
    """2^p containers x 2^(n-p) members == 2^n, exhaustively to n=30."""
    ok = scaling_split(ScalingParams(32, 24)) == (16777216, 256)
    checked = 0
    for n in range(0, 31):
        for p in range(0, n + 1):
            containers, per = scaling_split(ScalingParams(n, p))
            ok &= containers == 1 << p and per == 1 << (n - p)
            ok &= containers * per == 1 << n
            checked += 1
    _report("3 scaling-identity", ok, f"{checked} (n,p) pairs + spot value")


def test_criterion_4_vlan_containment():
    """Tags contain unicast and broadcast; floods never cross a router."""
    g = elaborate(parse_model(model_text("vlan.pnet"))[0])
    across_tags = not reachable(g, "AA", "CC") and not reachable(g, "CC", "BB")
    within_tag = reachable(g, "AA", "BB")
    flood = flood_set(g, "AA")
    exact_membership = flood == set(g.containers["vlan-10"]) == {"AA", "BB"}
    other_side = {"I1", "I2", "R1", "D"}
    router_barrier = (flood & other_side == set()) \
        and (flood_set(g, "CC") & other_side == set()) \
        and (flood_set(g, "D") & {"AA", "BB", "CC"} == set())
    _report("4 vlan-containment",
            across_tags and within_tag and exact_membership and router_barrier)


def test_criterion_5_proxy_fragility():
    """expand_proxy adds exactly 4 promises; each single deletion flips
    cooperation to false: 4/4."""
    base = PromiseGraph([Agent("C", AgentKind.SERVICE_HOST),
                         Agent("P", AgentKind.PROXY),
                         Agent("S", AgentKind.SERVICE_HOST)])
    g = expand_proxy(base, "C", "P", "S", give("web"))
    added = g.promises[len(base.promises):]
    exactly_four = len(added) == 4
    cooperative = check_cooperation(g, "S", "C").verdict
    flipped = sum(
        1 for victim in added
        if not check_cooperation(g.without_promise(victim), "S", "C").verdict)
    _report("5 proxy-fragility", exactly_four and cooperative and flipped == 4,
            f"{flipped}/4 deletions break cooperation")


def test_criterion_6_oracle_equivalence():
    """>=200 seeded random graphs: reachable matches the exhaustive
    path-enumeration oracle on all pairs; single_points_of_failure matches
    the one-agent-removal oracle. 100% agreement."""
    rng = random.Random(0xACCE55)
    graphs = 0
    pair_checks = 0
    spof_checks = 0
    agree = True
    while graphs < 200:
        g = random_graph(rng, max_agents=8, max_edges=24)
        graphs += 1
        ids = sorted(g.agents)
        for src, dst in itertools.product(ids, ids):
            pair_checks += 1
            if reachable(g, src, dst) != oracle_reachable(g, src, dst):
                agree = False
        for src in ids:
            dst = next((d for d in ids if d != src and reachable(g, src, d)), None)
            if dst is None:
                continue
            if single_points_of_failure(g, src, dst) != oracle_spof(g, src, dst):
                agree = False
            spof_checks += 1
            break
    _report("6 oracle-equivalence", agree,
            f"{graphs} graphs, {pair_checks} reachability pairs, {spof_checks} spof checks")


def test_criterion_7_compiler_closure():
    """>=100 random valid specs verify after compilation; deleting any
    single provides/receptor promise flips a sub-check (100% kill)."""
    rng = random.Random(0xC10503E)
    closure = True
    for _ in range(100):
        spec = random_policy_spec(rng)
        if not verify_compiled(spec, compile_policy(spec)).verdict:
            closure = False
    doc, _ = parse_model(model_text("three-tier.policy"))
    from pnet.dsl import policy_spec_of
    spec = policy_spec_of(doc)
    g = compile_policy(spec)
    killed = total = 0
    for p in g.promises:
        is_provide = p.body.polarity is Polarity.GIVE and p.promisee == "*"
        is_receptor = p.body.kind == "api-request"
        if not (is_provide or is_receptor):
            continue
        total += 1
        if not verify_compiled(spec, g.without_promise(p)).verdict:
            killed += 1
    _report("7 compiler-closure", closure and total > 0 and killed == total,
            f"100 specs closed, mutation kill {killed}/{total}")


def test_criterion_8_alignment_algebra():
    """check_alignment verdict == canonical set equality, invariant under
    duplication and reordering; >=1000 cases."""
    rng = random.Random(0xA115)
    kinds = ["http", "db", "dns", "ftp", "smtp"]
    ok = True
    cases = 0
    for _ in range(1000):
        promised = [give(rng.choice(kinds)) if rng.random() < 0.7
                    else use(rng.choice(kinds)) for _ in range(rng.randint(0, 6))]
        desired = list(promised)
        if rng.random() < 0.5 and desired:
            desired.pop(rng.randrange(len(desired)))  # make them differ
        if rng.random() < 0.5:
            desired += [rng.choice(desired or [give("x")])]  # duplicate
        rng.shuffle(desired)
        agents = [Agent("h", AgentKind.SERVICE_HOST), Agent("ext", AgentKind.SERVICE_HOST)]
        graph = PromiseGraph(agents, [Promise("h", "ext", b) for b in promised],
                             containers={"cell": {"h"}})
        verdict = check_alignment(desired, graph, "cell").verdict
        ok &= verdict == (body_set(desired) == body_set(promised))
        cases += 1
    _report("8 alignment-algebra", ok, f"{cases} randomized cases")


def test_criterion_9_parser_robustness():
    """1e5 random byte strings parse without crash or hang; render/parse
    round-trips on the model corpus; DOT output passes a syntax check."""
    rng = random.Random(0xF22)
    for _ in range(100_000):
        size = rng.randint(0, 60)
        junk = bytes(rng.randrange(256) for _ in range(size)).decode("latin-1")
        parse_model(junk)

    roundtrip = True
    dot_ok = True
    for path in sorted(MODELS.iterdir()):
        doc, diags = parse_model(path.read_text(encoding="utf-8"), source=path.name)
        roundtrip &= not [d for d in diags if d.severity == "error"]
        doc2, diags2 = parse_model(render_document(doc), source=path.name)
        roundtrip &= doc2.declarations == doc.declarations and not diags2
        graph = elaborate(doc)
        try:
            dot_ok &= check_dot(export_dot(graph))
        except Exception:
            dot_ok = False
    _report("9 parser-robustness", roundtrip and dot_ok,
            "100000 fuzz inputs, corpus round-trip, DOT check")
