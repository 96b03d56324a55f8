"""Compiles traces into deterministic plans of primitive driver steps.

The step algebra is backend-neutral: the mock driver and the wire-protocol
driver execute the same plan, which is what makes them comparable in tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

from .errors import CompileError
from .trace import ActionKind, OnMissing, Selector, Trace, UntilCondition, UrlPattern, validate_trace

PAGE_LOAD_CAP_MS = 60000
DEFAULT_CATEGORY = "uncategorized"


class StepOp(str, Enum):
    NAVIGATE = "navigate"
    RESOLVE = "resolve"
    CLICK = "click"
    CLICK_EACH_AND_RETURN = "click_each_and_return"
    LOOP = "loop"
    WAIT_IDLE = "wait_idle"
    RECORD_TARGET = "record_target"


@dataclass(frozen=True)
class PlanStep:
    """One primitive instruction; fields beyond ``op`` are op-specific.

    ``action_index`` points back at the trace action the step came from
    (None only for the opening navigate). ``binding`` names the element
    slot a resolve fills and a click/record_target reads.
    """

    op: StepOp
    action_index: Optional[int] = None
    url_template: Optional[str] = None
    selector: Optional[Selector] = None
    link_selector: Optional[Selector] = None
    binding: Optional[str] = None
    quiet_ms: Optional[int] = None
    cap_ms: Optional[int] = None
    category: Optional[str] = None
    until: Optional[UntilCondition] = None
    max_iterations: Optional[int] = None
    on_missing: OnMissing = OnMissing.FAIL
    body: Tuple["PlanStep", ...] = field(default=())


@dataclass(frozen=True)
class ActionPlan:
    steps: Tuple[PlanStep, ...]
    trace_id: str
    compiled_for: UrlPattern


def compile_trace(trace: Trace) -> ActionPlan:
    """Expand each action into its primitive step sequence.

    click       -> resolve, click, wait_idle, record_target
    click-all   -> resolve scope, click_each_and_return (which waits and
                   records per visited link)
    repeat-click-> loop(resolve, click, wait_idle, record_target)

    wait_idle blocks until the capture proxy has seen the action's
    wait_after_ms of network silence, capped at 60 s.
    """
    report = validate_trace(trace)
    if not report.ok():
        first = report.errors[0]
        raise CompileError(f"trace {trace.id!r} is invalid at {first.path}: {first.message}")

    steps: List[PlanStep] = [PlanStep(op=StepOp.NAVIGATE, url_template="{url}")]
    for index, action in enumerate(trace.actions):
        category = trace.categories.get(index, DEFAULT_CATEGORY)
        binding = f"b{index}"
        if action.kind is ActionKind.CLICK:
            steps.extend(_click_body(index, action.selector, binding, category,
                                     action.wait_after_ms, action.on_missing))
        elif action.kind is ActionKind.CLICK_ALL:
            steps.append(PlanStep(
                op=StepOp.RESOLVE, action_index=index, selector=action.scope_selector,
                binding=binding, on_missing=action.on_missing,
            ))
            steps.append(PlanStep(
                op=StepOp.CLICK_EACH_AND_RETURN, action_index=index, binding=binding,
                link_selector=action.link_selector, quiet_ms=action.wait_after_ms,
                cap_ms=PAGE_LOAD_CAP_MS, category=category, on_missing=action.on_missing,
            ))
        else:  # repeat-click
            steps.append(PlanStep(
                op=StepOp.LOOP, action_index=index, until=action.until,
                max_iterations=action.max_iterations, on_missing=action.on_missing,
                body=tuple(_click_body(index, action.selector, binding, category,
                                       action.wait_after_ms, action.on_missing)),
            ))
    return ActionPlan(steps=tuple(steps), trace_id=trace.id, compiled_for=trace.url_pattern)


def _click_body(index: int, selector: Selector, binding: str, category: str,
                wait_ms: int, on_missing: OnMissing) -> List[PlanStep]:
    return [
        PlanStep(op=StepOp.RESOLVE, action_index=index, selector=selector,
                 binding=binding, on_missing=on_missing),
        PlanStep(op=StepOp.CLICK, action_index=index, binding=binding),
        PlanStep(op=StepOp.WAIT_IDLE, action_index=index,
                 quiet_ms=wait_ms, cap_ms=PAGE_LOAD_CAP_MS),
        PlanStep(op=StepOp.RECORD_TARGET, action_index=index,
                 binding=binding, category=category),
    ]


def render_plan(plan: ActionPlan) -> str:
    """Debug text rendering, one step per line. Not a stability contract."""
    lines = [f"plan for trace {plan.trace_id} (pattern {plan.compiled_for.pattern})"]

    def emit(step: PlanStep, depth: int):
        pad = "  " * depth
        origin = "-" if step.action_index is None else str(step.action_index)
        if step.op is StepOp.NAVIGATE:
            lines.append(f"{pad}[{origin}] navigate {step.url_template}")
        elif step.op is StepOp.RESOLVE:
            sel = step.selector
            lines.append(f"{pad}[{origin}] resolve {step.binding} <- "
                         f"{sel.strategy.value} {sel.value!r} (on_missing={step.on_missing.value})")
        elif step.op is StepOp.CLICK:
            lines.append(f"{pad}[{origin}] click {step.binding}")
        elif step.op is StepOp.WAIT_IDLE:
            lines.append(f"{pad}[{origin}] wait_idle quiet={step.quiet_ms}ms cap={step.cap_ms}ms")
        elif step.op is StepOp.RECORD_TARGET:
            lines.append(f"{pad}[{origin}] record_target {step.binding} -> {step.category}")
        elif step.op is StepOp.CLICK_EACH_AND_RETURN:
            sel = step.link_selector
            lines.append(f"{pad}[{origin}] click_each_and_return scope={step.binding} "
                         f"links=({sel.strategy.value} {sel.value!r}) wait={step.quiet_ms}ms "
                         f"-> {step.category}")
        else:  # loop
            lines.append(f"{pad}[{origin}] loop until={step.until.value} "
                         f"max={step.max_iterations}:")
            for inner in step.body:
                emit(inner, depth + 1)

    for step in plan.steps:
        emit(step, 0)
    return "\n".join(lines) + "\n"
