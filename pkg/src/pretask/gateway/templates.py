"""Prompt templates for every model role.

Templates use ``{name}`` slots filled in a single pass by :func:`fill`, so
literal JSON braces in a template and braces inside substituted values are
left alone.
"""

from __future__ import annotations

import re
from typing import Mapping

_SLOT_RE = re.compile(r"\{([a-z_]+)\}")


def fill(template: str, values: Mapping[str, str]) -> str:
    return _SLOT_RE.sub(lambda m: values.get(m.group(1), m.group(0)), template)


TASK_GENERATION_TEMPLATE = """\
You are a synthetic {env_name} tool-use task generator.

Your goal is to generate diverse, realistic, and challenging task instructions that an AI assistant would need to complete.

Server function docs:
{api_docs}

## Guidelines
- Feasibility: Generate tasks that are actually executable with the given functions
- Each task must be solvable in one user request.
- Ground tasks in the available server docs and any provided environment information.
- If environment information is provided, prefer entities, files, users, tickets, airports, and symbols that are explicitly supported there.
- If environment information is missing or sparse, avoid inventing highly specific filenames, IDs, or credentials unless they are already implied by the server docs or prior task history.
- Prefer tasks that teach reusable agent behavior: inspect state, retrieve the right information, transform it, then act.
- Avoid vague requests such as "look around", "analyze everything", or tasks without a clear finish condition.
- Only require a user-facing final answer when an explicit output action is relevant, such as posting, messaging, commenting, writing, logging, or displaying through a tool.
- Otherwise, frame the task around the required tool or state operation, not around "telling", "showing", or "reporting" the answer.
- Do not infer an output requirement from user-facing wording alone.
- Use only servers that are relevant to the task.
- Do not assume hidden files, extra tickets, custom credentials, or custom log files unless they were grounded by environment information.
- `intended_functions` is optional and is only a lightweight hint for analysis/logging.
- The actual executable function set is determined by the selected `servers`, not by `intended_functions`.

## Environment Information
{environment_info_section}

## Prior Task History
- Use prior task history as weak guidance for where to explore next, not as templates to imitate.
- Push beyond solved tasks with meaningfully harder or more diverse task structures.
- Use failure tasks to understand current model limitations and common mistakes, not as targets to reproduce.
- Use infeasible tasks only to avoid invalid setups or impossible assumptions.
- Treat failure or infeasibility reasons as short hints about missing skills or bad assumptions, not as instructions to retry the same pattern.
- Avoid near-duplicates: do not merely rename entities or tweak dates, numbers, thresholds, or output format while keeping the same task pattern.
- Keep the batch diverse across different servers, apps, tools, APIs, entities, reasoning patterns, and action structures.
- Use the usage statistics as weak context about prior coverage, not as hard constraints or item-specific targets.
- Avoid overcommitting to a narrow set of heavily repeated items, but do not force tasks around specific low-count items just because they appear less used.
- Prefer feasible expansions that broaden coverage naturally instead of optimizing for any single app, API, server, or function name.

{task_history_section}

## Output Format
Return a JSON array of task instructions:
```json
[
  {
    "servers": ["Server1", "Server2"],
    "intended_functions": ["Server1.function1", "Server2.function2"],
    "question": "single user request"
  }
]

Generate {num_tasks} diverse task instructions:"""


VALIDATOR_TEMPLATE = """\
You are validating whether a synthetic {env_name} task execution produced a useful memory signal.

Evaluate the following Task and Trajectory using a 5-point Likert scale for each criterion.

## Evaluation Criteria

### 1. Task Feasibility
Evaluate whether the task is executable with the available tools and whether every required intermediate fact is grounded in the trajectory evidence.

- Verify that every required target entity, field, metric, or intermediate value in the instruction is positively supported by tool outputs as existing and usable for the requested operation.
- A required file, user, ticket, route, credential, or other entity is grounded only if the trajectory provides positive evidence that it exists and is usable for the requested operation.
- Negative evidence such as "not found", empty matches, missing records, authentication failure, unavailable routes, or lookup errors should count against feasibility rather than as grounding.
- Failed lookup attempts do not make a required entity grounded.

- **5 (Excellent)**: Fully executable as stated; all required entities, metrics, and intermediate values are explicitly grounded in trajectory evidence.
- **4 (Good)**: Executable with minor ambiguity, but the needed values and entities are still reasonably supported by the trajectory.
- **3 (Acceptable)**: Plausibly executable, but one key field, metric, or grounding step is weakly supported or only partially observed.
- **2 (Poor)**: Likely infeasible in practice; a required entity, field, or intermediate value is missing from observable tool outputs.
- **1 (Unacceptable)**: Infeasible/contradictory; the task relies on unsupported tools, impossible preconditions, or missing critical values that cannot be grounded.

### 2. Task Completion
Judge whether the task instruction was successfully completed.

- Evaluate whether all required steps and constraints are satisfied based on the trajectory.

- **5 (Excellent)**: Every requirement and constraint is satisfied.
- **4 (Good)**: The task appears completed with only minor ambiguity, and no important requirement is missing.
- **3 (Acceptable)**: Some progress, but at least one requirement or constraint is missing or weakly supported.
- **2 (Poor)**: Minor progress only; the main outcome is not achieved or remains unverified.
- **1 (Unacceptable)**: No meaningful completion.

Task:
{task_instruction}

Trajectory:
{trajectory}

Return strict JSON with:
{
  "feasibility_reason": "short reason",
  "feasibility_score": 1-5,
  "task_completion_reason": "short reason",
  "task_completion_score": 1-5,
}"""


ENV_SUMMARY_TEMPLATE = """\
You are analyzing an AI agent's execution trajectory to extract grounded environment observations for future synthetic task generation.

Your goal is to summarize only reusable environment facts observed in this trajectory.

Requirements:
- Focus on concrete observations that could ground future tasks.
- Preserve task-local coherence: keep related observations together instead of flattening unrelated names into one loose list.
- Exclude anything created, posted, added, invited, updated, renamed, or otherwise changed by the agent during this task unless it reveals an important constraint or action pattern.
- Exclude generic API documentation, schemas, and error messages.
- Prefer observations grounded in {env_name} server state, tool outputs, state constraints, and repeated action patterns.
- Keep the summary compact: 2-5 bullet lines total.

Return ONLY JSON:
```json
{
  "summary": "- observation 1\\n- observation 2"
}
```
Task:
{task_instruction}

Trajectory:
{trajectory}"""


REFLECTOR_TEMPLATE = """\
You are an expert {env_name} tool-use agent and educator. Your job is to diagnose the current trajectory: identify what went wrong (or could be better), API usage, and ground truth when applicable.

Instructions:
- Carefully analyze the model's reasoning trace to identify where it went wrong
- Take the environment feedback into account, comparing the predicted answer with the (optional) ground truth to understand the gap
- Identify specific conceptual errors, calculation mistakes, or misapplied strategies
- Provide actionable insights that could help the model avoid this mistake in the future
- Identify root causes: wrong source of truth, bad filters (timeframe/direction/identity), formatting issues, or missing authentication and how to correct them.
- Provide concrete, step-by-step corrections the model should take in this task.
- Be specific about what the model should have done differently
- You will receive bulletpoints that are part of playbook that's used by the generator to answer the question.
- You need to analyze these bulletpoints, and give the tag for each bulletpoint, tag can be ['helpful', 'harmful', 'neutral'] (for the generator to generate the correct answer)
- Explicitly curate from the environment feedback the output format/schema of APIs used when unclear or mismatched with expectations (e.g., apis.blah.show_contents() returns a list of content_ids (strings), not content objects)

Inputs:

Task Instruction:
{task_instruction}

Ground Truth Result:
{ground_truth_result}

Current Playbook:
{playbook}

Agent-Environment Trajectory:
{trajectory}

Outputs: Your output should be a json object, which contains the following fields
- reasoning: your chain of thought / reasoning / thinking process, detailed analysis and calculations
- error_identification: what specifically went wrong in the reasoning?
- root_cause_analysis: why did this error occur? What concept was misunderstood?
- correct_approach: what should the model have done instead?
- key_insight: what strategy, formula, or principle should be remembered to avoid this error?
- bullet_tags: a dictionary mapping each bullet_id (the {section}-{number} prefix shown in the playbook) to its tag ('helpful', 'harmful', or 'neutral')
Answer in this exact JSON format:

{
"reasoning": "[Your chain of thought / reasoning / thinking process, detailed analysis and calculations]",
"error_identification": "[What specifically went wrong in the reasoning?]",
"root_cause_analysis": "[Why did this error occur? What concept was misunderstood?]",
"correct_approach": "[What should the model have done instead?]",
"key_insight": "[What strategy, formula, or principle should be remembered to avoid this error?]",
"bullet_tags": {"bullet_id_1": "helpful", "bullet_id_2": "harmful", "bullet_id_3": "neutral"}
}"""


CURATOR_TEMPLATE = """\
You are a master curator of knowledge. Your job is to identify what new insights should be added to an existing playbook based on a reflection from a previous attempt.

Context:
- The playbook you created will be used to help answering similar questions.

Instructions:
- Review the existing playbook and the reflection from the previous attempt
- Identify ONLY the NEW insights, strategies, or mistakes that are MISSING from the current playbook
- Avoid redundancy - if similar advice already exists, only add new content that is a perfect complement to the existing playbook
- Do NOT regenerate the entire playbook - only provide the additions needed
- Focus on quality over quantity - a focused, well-organized playbook is better than an exhaustive one
- Format your response as a PURE JSON object with specific sections
- For any operation if no new content to add, return an empty list for the operations field
- Be concise and specific - each addition should be actionable
- For coding tasks, explicitly curate from the reflections the output format/schema of APIs used when unclear or mismatched with expectations (e.g., apis.blah.show_contents() returns a list of content_ids (strings), not content objects)

Inputs:

Task Instruction:
{task_instruction}

Current Playbook:
{playbook}

Agent-Environment Trajectory:
{trajectory}

Current Reflections (principles and strategies that helped to achieve current task):
{current_reflections}

Your Task:
Output ONLY a valid JSON object with these exact fields:
- reasoning: your chain of thought / reasoning / thinking process, detailed analysis and calculations
- operations: a list of operations to be performed on the playbook
- type: the type of operation to be performed
- section: the section to add the bullet to (one of: strategies, code_snippets, pitfalls)
- content: the new content of the bullet

Available Operations:
1. ADD: Create new bullet points with fresh IDs
- section: the section to add the new bullet to
- content: the new content of the bullet. Note: no need to include the bullet_id in the content like '[ctx-00263] helpful=1 harmful=0 ::', the bullet_id will be added by the system.

RESPONSE FORMAT - Output ONLY this JSON structure (no markdown, no code blocks):
{
"reasoning": "...",
"operations": [
    { "type": "ADD", "section": "...", "content": "..." }
]
}"""


SOLVER_TEMPLATE = """\
You are a tool-use agent operating in the {env_name} environment on behalf of a user. Work step by step: issue one action, read the observation, then decide the next action.

Available tools:
{documentation}

Playbook (procedural memory from earlier practice in this environment):
{solver_memory}

Reply with exactly one action:
CALL <app>.<tool> {"argument": value, ...}
DONE <final answer, or a short note that the task is complete>

Task: {instruction}

Transcript so far:
{transcript}

Next action:"""
