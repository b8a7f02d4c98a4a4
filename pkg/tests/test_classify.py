import json
import subprocess
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from scrape_audit.classify import (
    ERROR_CATEGORY,
    BaselineKeywordAdapter,
    HttpAdapter,
    SubprocessLineAdapter,
    default_vocab,
    get_adapter,
    load_vocab,
)
from scrape_audit.simulator import LOGIN_TEXT, PAYWALL_TEXT


@pytest.fixture(scope="module")
def baseline():
    return BaselineKeywordAdapter()


def test_empty_text_falls_back_with_zero_score(baseline):
    assert baseline.classify_text("") == ("non_thematic", 0.0)
    assert baseline.classify_text("   \n ") == ("non_thematic", 0.0)


def test_no_keyword_hits_fall_back(baseline):
    category, score = baseline.classify_text("lorem ipsum dolor sit amet")
    assert category == "non_thematic"
    assert score == 0.0


def test_score_is_hits_over_hits_plus_prior(baseline):
    # three commerce tokens, prior 3: score = 3 / (3 + 3)
    category, score = baseline.classify_text("Abo Abo payment")
    assert category == "commerce"
    assert score == pytest.approx(0.5)


def test_whole_token_matching_ignores_inflected_forms(baseline):
    assert baseline.classify_text("abonnements")[0] == "non_thematic"
    assert baseline.classify_text("abonnement")[0] == "commerce"


def test_majority_category_wins(baseline):
    text = "regierung parlament wahl spiel"
    assert baseline.classify_text(text)[0] == "politics"


def test_tie_breaks_alphabetically(baseline):
    # one politics hit vs one commerce hit: commerce sorts first
    category, _ = baseline.classify_text("regierung abo")
    assert category == "commerce"


def test_paywall_prompt_reads_as_commerce_with_high_score(baseline):
    category, score = baseline.classify_text(PAYWALL_TEXT)
    assert category == "commerce"
    assert score >= 0.7


def test_login_prompt_reads_as_technology_with_high_score(baseline):
    category, score = baseline.classify_text(LOGIN_TEXT)
    assert category == "technology"
    assert score >= 0.7


def test_batch_classify_covers_all_ids(baseline):
    items = [("a", "regierung"), ("b", ""), ("c", "tor spiel liga")]
    out = baseline.classify(items)
    assert set(out) == {"a", "b", "c"}
    assert out["a"][0] == "politics"
    assert out["c"][0] == "sports"


def test_category_universe_is_declared(baseline):
    assert "non_thematic" in baseline.categories
    assert "commerce" in baseline.categories
    assert list(baseline.categories) == sorted(set(baseline.categories), key=baseline.categories.index)


def test_vocab_validation_rejects_uppercase():
    with pytest.raises(ValueError, match="lowercase"):
        load_vocab({"fallback_category": "x", "score_prior": 3, "categories": {"a": ["Bad"]}})


BASELINE_CMD = [sys.executable, "-m", "scrape_audit.classify"]


def test_stdio_server_speaks_line_protocol():
    proc = subprocess.Popen(
        BASELINE_CMD, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True
    )
    try:
        requests = [
            {"id": "x1", "text": "regierung und parlament"},
            {"id": "x2", "text": ""},
        ]
        payload = "".join(json.dumps(r) + "\n" for r in requests)
        stdout, _ = proc.communicate(payload, timeout=15)
        lines = [json.loads(line) for line in stdout.splitlines()]
        by_id = {line["id"]: line for line in lines}
        assert by_id["x1"]["category"] == "politics"
        assert by_id["x2"]["category"] == "non_thematic"
        assert by_id["x2"]["score"] == 0.0
    finally:
        proc.kill()


def test_subprocess_adapter_round_trip():
    with SubprocessLineAdapter(BASELINE_CMD, timeout=15) as adapter:
        out = adapter.classify([("v1", "tor spiel liga"), ("v2", "abo payment abo")])
        assert out["v1"][0] == "sports"
        assert out["v2"][0] == "commerce"
        # the child stays up across batches
        again = adapter.classify([("v3", "impfung arzt")])
        assert again["v3"][0] == "health"


OUT_OF_ORDER_CHILD = """
import json, sys
lines = [sys.stdin.readline() for _ in range(3)]
for line in reversed(lines):
    req = json.loads(line)
    sys.stdout.write(json.dumps({"id": req["id"], "category": "politics", "score": 0.9}) + "\\n")
sys.stdout.flush()
"""


def test_subprocess_adapter_matches_out_of_order_responses():
    with SubprocessLineAdapter([sys.executable, "-c", OUT_OF_ORDER_CHILD], timeout=15) as adapter:
        out = adapter.classify([("a", "x"), ("b", "y"), ("c", "z")])
    assert out == {k: ("politics", 0.9) for k in ("a", "b", "c")}


def test_subprocess_adapter_dead_child_yields_error_category():
    with SubprocessLineAdapter([sys.executable, "-c", "import sys; sys.exit(1)"], timeout=3) as adapter:
        out = adapter.classify([("a", "x"), ("b", "y")])
    assert out == {"a": (ERROR_CATEGORY, 0.0), "b": (ERROR_CATEGORY, 0.0)}


def test_subprocess_adapter_times_out_on_silent_child():
    child = "import time, sys; sys.stdin.readline(); time.sleep(60)"
    with SubprocessLineAdapter([sys.executable, "-c", child], timeout=0.5) as adapter:
        out = adapter.classify([("a", "x")])
    assert out["a"] == (ERROR_CATEGORY, 0.0)


def test_subprocess_adapter_skips_malformed_lines():
    child = (
        "import json, sys\n"
        "req = json.loads(sys.stdin.readline())\n"
        "print('this is not json')\n"
        "print(json.dumps({'id': req['id'], 'category': 'sports', 'score': 0.4}))\n"
    )
    with SubprocessLineAdapter([sys.executable, "-c", child], timeout=15) as adapter:
        out = adapter.classify([("a", "x")])
    assert out["a"] == ("sports", 0.4)


class _EchoHandler(BaseHTTPRequestHandler):
    def log_message(self, *args):
        pass

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        requests = [json.loads(line) for line in self.rfile.read(length).decode().splitlines()]
        # reply in reverse order to exercise id matching
        body = "".join(
            json.dumps({"id": r["id"], "category": "culture", "score": 0.6}) + "\n"
            for r in reversed(requests)
        ).encode()
        self.send_response(200)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


@pytest.fixture()
def http_endpoint():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _EchoHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}/classify"
    server.shutdown()
    server.server_close()


def test_http_adapter_round_trip(http_endpoint):
    adapter = HttpAdapter(http_endpoint, timeout=5)
    out = adapter.classify([("a", "x"), ("b", "y")])
    assert out == {"a": ("culture", 0.6), "b": ("culture", 0.6)}


def test_http_adapter_connection_refused_yields_error_category():
    import socket

    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    adapter = HttpAdapter(f"http://127.0.0.1:{port}/classify", timeout=2)
    assert adapter.classify([("a", "x")])["a"] == (ERROR_CATEGORY, 0.0)


def test_get_adapter_dispatch():
    assert isinstance(get_adapter(None), BaselineKeywordAdapter)
    assert isinstance(get_adapter("baseline"), BaselineKeywordAdapter)
    assert isinstance(get_adapter("http://127.0.0.1:1/x"), HttpAdapter)
    adapter = get_adapter("python3 -m scrape_audit.classify")
    assert isinstance(adapter, SubprocessLineAdapter)
    assert adapter.command[0] == "python3"


def test_scores_clamped_to_unit_interval():
    child = (
        "import json, sys\n"
        "req = json.loads(sys.stdin.readline())\n"
        "print(json.dumps({'id': req['id'], 'category': 'sports', 'score': 1.7}))\n"
    )
    with SubprocessLineAdapter([sys.executable, "-c", child], timeout=15) as adapter:
        out = adapter.classify([("a", "x")])
    assert out["a"] == ("sports", 1.0)
