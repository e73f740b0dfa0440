import os
import stat
import textwrap

import numpy as np
import pytest

from cogabench.actions import ActionType
from cogabench.affordance import (
    AffordanceSet,
    DroppingProvider,
    ExternalScriptProvider,
    builtin_provider,
    run_external_script,
)
from cogabench.affordance.providers import provider_f1
from cogabench.env import TASK_IDS, make
from cogabench.errors import ConfigurationError, ScriptExecutionError

BLANK = np.full((210, 160, 3), 255, dtype=np.uint8)


def write_script(tmp_path, body, name="script.py"):
    p = tmp_path / name
    p.write_text(textwrap.dedent(body))
    return p


ECHO_ONE = """
    def determine_affordable_actions(image):
        return [{"action": "CLICK_COORDS", "coords": [10, 30, 50, 60]}]
"""


class TestExternalScripts:
    def test_stub_returns_one_affordance(self, tmp_path):
        p = write_script(tmp_path, ECHO_ONE)
        aff = run_external_script(p, BLANK)
        assert len(aff) == 1
        a = next(iter(aff))
        assert a.action_type is ActionType.CLICK_COORDS
        assert a.bbox.as_tuple() == (10, 30, 50, 60)

    def test_exception_carries_trace(self, tmp_path):
        p = write_script(
            tmp_path,
            """
            def determine_affordable_actions(image):
                raise ValueError("boom at pixel 9")
            """,
        )
        with pytest.raises(ScriptExecutionError) as ei:
            run_external_script(p, BLANK)
        assert "boom at pixel 9" in ei.value.detail()
        assert "ValueError" in ei.value.detail()

    def test_unknown_action_name_rejected(self, tmp_path):
        p = write_script(
            tmp_path,
            """
            def determine_affordable_actions(image):
                return [{"action": "MOVE_COORDS", "coords": [0, 0, 5, 5]}]
            """,
        )
        with pytest.raises(ScriptExecutionError, match="MOVE_COORDS"):
            run_external_script(p, BLANK)

    def test_timeout(self, tmp_path):
        p = write_script(
            tmp_path,
            """
            import time

            def determine_affordable_actions(image):
                time.sleep(60)
                return []
            """,
        )
        with pytest.raises(ScriptExecutionError, match="timed out"):
            run_external_script(p, BLANK, timeout=2.0)

    def test_missing_script(self, tmp_path):
        with pytest.raises(ScriptExecutionError, match="not found"):
            run_external_script(tmp_path / "nope.py", BLANK)

    def test_script_sees_real_pixels(self, tmp_path):
        p = write_script(
            tmp_path,
            """
            def determine_affordable_actions(image):
                h, w, c = image.shape
                assert (h, w, c) == (210, 160, 3)
                y, x = [int(v[0]) for v in (image[..., 0] < 128).nonzero()[:2]]
                return [{"action": "CLICK_COORDS", "coords": [x, y, x + 4, y + 4]}]
            """,
        )
        img = BLANK.copy()
        img[100:120, 40:60] = (0, 0, 0)
        aff = next(iter(run_external_script(p, img)))
        assert aff.bbox.y_up == 100

    def test_direct_protocol_executable(self, tmp_path):
        p = tmp_path / "direct"
        p.write_text(
            "#!/usr/bin/env python3\n"
            "import json, sys\n"
            "json.loads(sys.stdin.readline())\n"
            'print(json.dumps({"affordances": [{"action": "END_DRAG", "coords": [1, 2, 9, 9]}]}))\n'
        )
        p.chmod(p.stat().st_mode | stat.S_IXUSR)
        aff = next(iter(run_external_script(p, BLANK)))
        assert aff.action_type is ActionType.END_DRAG

    def test_repeated_runs_identical(self, tmp_path):
        env = make("click-test")
        obs = env.reset(0)
        p = write_script(
            tmp_path,
            """
            def determine_affordable_actions(image):
                ys, xs = (image[24:, :, 0] < 240).nonzero()
                x1, y1 = int(xs.min()), int(ys.min()) + 24
                x2, y2 = int(xs.max()) + 1, int(ys.max()) + 1 + 24
                return [{"action": "CLICK_COORDS", "coords": [x1, y1, x2, y2]}]
            """,
        )
        results = [run_external_script(p, obs) for _ in range(10)]
        assert all(r == results[0] for r in results)

    def test_external_provider_caches(self, tmp_path, monkeypatch):
        p = write_script(tmp_path, ECHO_ONE)
        provider = ExternalScriptProvider(p)
        calls = []
        real = provider._compute

        def counted(pixels):
            calls.append(1)
            return real(pixels)

        monkeypatch.setattr(provider, "_compute", counted)
        for _ in range(5):
            provider.query(BLANK)
        assert len(calls) == 1


class TestBuiltinProviders:
    def test_unknown_task(self):
        with pytest.raises(ConfigurationError):
            builtin_provider("click-nothing")

    def test_blank_observation_empty(self):
        for tid in TASK_IDS:
            assert builtin_provider(tid).query(BLANK) == AffordanceSet()

    @pytest.mark.parametrize("tid", TASK_IDS)
    def test_f1_against_oracle_100_episodes(self, tid):
        s = provider_f1(builtin_provider(tid), tid, seeds=range(100))
        assert s.mean_f1 >= 0.95, (tid, s)

    def test_click_test_2_finds_both_buttons(self):
        env = make("click-test-2")
        obs = env.reset(0)
        aff = builtin_provider("click-test-2").query(obs)
        gt = env.oracle_affordances()
        for g in gt:
            assert any(
                a.action_type == g.action_type
                and a.bbox.x_left < g.bbox.x_right
                and g.bbox.x_left < a.bbox.x_right
                for a in aff
            )

    def test_determinism_without_cache(self):
        env = make("click-tab")
        obs = env.reset(3)
        p = builtin_provider("click-tab")
        runs = [p._compute(np.asarray(obs.pixels)) for _ in range(10)]
        assert all(r == runs[0] for r in runs)

    def test_query_uses_cache(self, monkeypatch):
        env = make("click-test")
        obs = env.reset(0)
        p = builtin_provider("click-test")
        calls = []
        real = p._compute
        monkeypatch.setattr(p, "_compute", lambda px: (calls.append(1), real(px))[1])
        for _ in range(10):
            p.query(obs)
        assert len(calls) == 1


class TestDroppingProvider:
    def test_drop_zero_is_identity_object(self):
        inner = builtin_provider("click-test-2")
        wrapped = DroppingProvider(inner, 0.0, seed=0)
        obs = make("click-test-2").reset(1)
        assert wrapped.query(obs) is inner.query(obs)

    def test_drop_one_always_empty(self):
        inner = builtin_provider("click-test")
        wrapped = DroppingProvider(inner, 1.0, seed=0)
        for s in range(5):
            obs = make("click-test").reset(s)
            assert wrapped.query(obs) == AffordanceSet()

    def test_drop_half_count(self):
        inner = builtin_provider("count-sides")
        obs = make("count-sides").reset(2)
        n_full = len(inner.query(obs))
        wrapped = DroppingProvider(inner, 0.5, seed=3)
        n = len(wrapped.query(obs))
        assert n == n_full - int(round(0.5 * n_full))

    def test_seeded_reproducibility(self):
        obs = make("count-sides").reset(2)

        def run(seed):
            w = DroppingProvider(builtin_provider("count-sides"), 0.5, seed=seed)
            return [w.query(obs) for _ in range(3)]

        assert run(7) == run(7)

    def test_bad_fraction(self):
        with pytest.raises(ConfigurationError):
            DroppingProvider(builtin_provider("click-test"), 1.5, seed=0)
