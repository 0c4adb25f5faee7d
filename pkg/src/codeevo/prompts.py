"""Prompt templates for the coder and reviewer roles.

The templates are frozen wire text: rendering substitutes slot values and
changes nothing else, so tests can verify byte-level fidelity outside the
slots. Keyword lists render comma-separated; difficulty approaches render
as an indented block.
"""

NEW_SECTION_MARKER = "###New"

CODER_GENERATE_TEMPLATE = (
    "Write python code to solve the following problem:\n"
    "{problem}.\n"
    "Include test case execution in your code."
)

REVIEWER_EVALUATE_TEMPLATE = (
    "Next I will give you a coding problem, a piece of code, and the execution result "
    "of this code. Please determine if the code given correctly solves the problem given.\n"
    "The problem is described as:\n"
    "{problem}\n"
    "The code to be assessed is:\n"
    "{code}\n"
    "The output of this code during execution is:\n"
    "{outputs}\n"
    "The error message generated during execution is:\n"
    "{errors}\n"
    'First output "Success" or "Failure" as your judgement. Then explain the reasons '
    "and possible improvements. Do not give out improved codes."
)

CODER_REFINE_TEMPLATE = (
    "The following is an evaluation and feedback on whether the code you generated "
    "successfully answered the given question:\n"
    "{feedback}\n"
    "Please use this feedback to improve your code so that it answers the question "
    "correctly. Still, output the refined code block only."
)

EVOLVE_HARDER_TEMPLATE = (
    "Below I will give you a programming problem and its keywords, design a programming "
    "problem based on this programming problem that is knowledge related but more difficult.\n"
    "You can increase the difficulty by using, but not limited to, the following methods:\n"
    "    {approaches}\n"
    "Please use the following output format:\n"
    "###New\n"
    " New programming problem you designed \n"
    "This original programming problem is described as:\n"
    "{problem}\n"
    "The keywords of the original problem are:\n"
    "{keywords}"
)

EVOLVE_SIMPLER_TEMPLATE = (
    "Below I will give you a programming problem and its keywords, design a programming "
    "problem based on this programming problem that is knowledge related but simpler, "
    "using only the given keywords.\n"
    "You can decrease the difficulty by using, but not limited to, the following methods:\n"
    "    {approaches}\n"
    "Please use the following output format:\n"
    "###New\n"
    " New programming problem you designed \n"
    "This original programming problem is described as:\n"
    "{problem}\n"
    "The keywords to retain in the new problem are:\n"
    "{keywords}"
)

KEYWORD_TEMPLATE = (
    "You are given a text that includes a programming problem description and "
    "explanations of its solutions. Your task is to identify and list the key "
    "programming concepts, data structures, or algorithms that are central to solving "
    "the problem. Provide your answer as a list of keywords or tags (e.g., \"Array\", "
    "\"Hash Table\", \"Sorting\", \"Recursion\", \"Loop\", \"String\", \"Stack\") that "
    "best capture the main ideas or techniques involved.\n"
    "For example, if the problem involves finding two numbers in an array that add up "
    "to a target sum, appropriate tags might be \"Array\" and \"Hash Table\".\n"
    "Now, here is the text:\n"
    "{text}\n"
    "Please provide the keywords for this problem as a comma-separated list "
    "(e.g., \"Array, Hash Table\")."
)

HARDER_APPROACHES = (
    "Add new constraints or requirements that the solution must satisfy.",
    "Require a more efficient algorithm or a stricter time or space complexity.",
    "Replace a common data structure with a less common or composite one.",
    "Add edge cases that the solution must handle explicitly.",
    "Combine the problem with another concept named in the keywords.",
)

SIMPLER_APPROACHES = (
    "Remove constraints or requirements from the original problem.",
    "Reduce the input size or dimensionality.",
    "Allow a straightforward algorithm without complexity requirements.",
    "Narrow the problem to the core concept named in the keywords.",
)


def render_approaches(approaches) -> str:
    """Join approach lines into the indented block the evolve templates expect."""
    return "\n    ".join(approaches)


def render_keywords(keywords) -> str:
    """Join keyword tags into the comma-separated slot form."""
    return ", ".join(keywords)


def render_coder_generate(problem: str) -> str:
    return CODER_GENERATE_TEMPLATE.format(problem=problem)


def render_coder_refine(feedback: str) -> str:
    return CODER_REFINE_TEMPLATE.format(feedback=feedback)


def render_reviewer_evaluate(problem: str, code: str, outputs: str, errors: str) -> str:
    return REVIEWER_EVALUATE_TEMPLATE.format(
        problem=problem, code=code, outputs=outputs, errors=errors
    )


def render_evolve_harder(problem: str, keywords, approaches=HARDER_APPROACHES) -> str:
    return EVOLVE_HARDER_TEMPLATE.format(
        approaches=render_approaches(approaches),
        problem=problem,
        keywords=render_keywords(keywords),
    )


def render_evolve_simpler(problem: str, keywords, approaches=SIMPLER_APPROACHES) -> str:
    return EVOLVE_SIMPLER_TEMPLATE.format(
        approaches=render_approaches(approaches),
        problem=problem,
        keywords=render_keywords(keywords),
    )


def render_keyword_request(text: str) -> str:
    return KEYWORD_TEMPLATE.format(text=text)
