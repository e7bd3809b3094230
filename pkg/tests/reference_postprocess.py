"""Straightforward reference implementations of the truncation rules.

Kept deliberately plain and separate from the package: the test suite runs
these as oracles against the production operations and requires byte-exact
agreement on randomized inputs.
"""


def single_line_infill_postprocess(completion):
    lines = completion.splitlines()
    for line in lines:
        current_line = line.strip()
        if not current_line:
            continue
        if current_line.startswith("#"):
            continue
        return line
    return ""


def multi_line_infill_postprocess(completion, num_lines):
    assert num_lines > 0
    l = 0
    completion_lines = []
    for line in completion.split("\n"):
        completion_lines.append(line)
        current_line = line.strip()
        if current_line and not current_line.startswith("#"):
            l += 1
            if l == num_lines:
                break
    completion = "\n".join(completion_lines)
    return completion


def remove_overlap_prefix_middle(prefix, middle):
    prefix_len = len(prefix)
    middle_len = len(middle)
    for i in range(min(prefix_len, middle_len), 0, -1):
        if middle.startswith(prefix[-i:]):
            return middle[i:]
    return middle


def remove_overlap_middle_suffix(middle, suffix):
    suffix_len = len(suffix)
    middle_len = len(middle)
    for i in range(min(middle_len, suffix_len), 0, -1):
        if middle.endswith(suffix[:i]):
            return middle[:-i]
    return middle


def random_span_infill_postprocess(completion, prefix, suffix):
    completion = remove_overlap_prefix_middle(prefix, completion)
    completion = remove_overlap_middle_suffix(completion, suffix)
    return completion
