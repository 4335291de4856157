_results = {}


def pytest_collection_modifyitems(items):
    for item in items:
        criterion = getattr(getattr(item, "function", None), "criterion", None)
        if criterion is not None:
            item.user_properties.append(("criterion", criterion))


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or report.outcome != "passed":
        _results[props["criterion"]] = (report.outcome, props)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for (number, title), (outcome, props) in sorted(_results.items()):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[outcome]
        if props.get("gated") is False and outcome == "passed":
            status = "INFO"
        detail = props.get("detail", "")
        tr.write_line(f"[{status}] {number:2d}. {title}" + (f" -- {detail}" if detail else ""))
