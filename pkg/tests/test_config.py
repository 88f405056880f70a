import json
import threading

import pytest
from hypothesis import given, strategies as st

from slamkit.config import (
    ArgParser,
    ArgSpec,
    ConfigError,
    ConfigTree,
    ParseError,
    TypeConflictError,
    UnsupportedFormatError,
    coerce_scalar,
    help_text,
    load_tree,
    parse_args,
    save_tree,
)


class TestTree:
    def test_set_creates_intermediate_maps(self):
        t = ConfigTree()
        t.set("a.b.c", 3)
        assert t.get("a.b.c") == 3
        assert t.get("a.b") == {"c": 3}

    def test_get_missing_raises_and_never_mutates(self):
        t = ConfigTree()
        with pytest.raises(KeyError):
            t.get("x.y")
        assert t.as_dict() == {}
        assert t.get("x.y", 7) == 7
        assert t.as_dict() == {}

    def test_scalar_over_map_conflict(self):
        t = ConfigTree()
        t.set("cam.fx", 500)
        with pytest.raises(TypeConflictError):
            t.set("cam", 1)
        with pytest.raises(TypeConflictError):
            t.set("cam.fx.sub", 2)

    def test_watch_callback(self):
        t = ConfigTree()
        seen = []
        h = t.watch("a.b", lambda p, v: seen.append((p, v, threading.get_ident())))
        t.set("a.b", 1)
        t.set("a.c", 2)
        h.cancel()
        t.set("a.b", 3)
        assert [(p, v) for p, v, _ in seen] == [("a.b", 1)]
        assert seen[0][2] == threading.get_ident()

    def test_concurrent_reads_during_writes(self):
        t = ConfigTree()
        t.set("n", 0)
        stop = threading.Event()
        errors = []

        def reader():
            while not stop.is_set():
                v = t.get("n")
                if not isinstance(v, int):
                    errors.append(v)

        threads = [threading.Thread(target=reader) for _ in range(4)]
        for th in threads:
            th.start()
        for i in range(500):
            t.set("n", i)
        stop.set()
        for th in threads:
            th.join()
        assert not errors


class TestParse:
    def test_direct_override(self):
        tree = parse_args(["--a.b=3"], [ArgSpec("a.b", 1)])
        assert tree.get("a.b") == 3

    def test_default_passthrough(self):
        tree = parse_args([], [ArgSpec("x", 2.5)])
        assert tree.get("x") == 2.5

    def test_file_below_argv(self, tmp_path):
        conf = tmp_path / "c.json"
        conf.write_text(json.dumps({"y": 1}))
        tree = parse_args(["--conf", str(conf), "--y=7"], [ArgSpec("y", 0)])
        assert tree.get("y") == 7
        tree = parse_args(["--conf", str(conf)], [ArgSpec("y", 0)])
        assert tree.get("y") == 1

    def test_env_between_argv_and_file(self, tmp_path):
        conf = tmp_path / "c.yaml"
        conf.write_text("y: 1\n")
        env = {"y": "5"}
        tree = parse_args(["--conf", str(conf)], [ArgSpec("y", 0)], environ=env)
        assert tree.get("y") == 5
        tree = parse_args(["--conf", str(conf), "--y=7"], [ArgSpec("y", 0)], environ=env)
        assert tree.get("y") == 7

    def test_env_underscore_fallback(self):
        tree = parse_args([], [ArgSpec("a.b", 0)], environ={"a_b": "9"})
        assert tree.get("a.b") == 9

    def test_unknown_flag_stored_with_warning(self):
        tree = parse_args(["--mystery=1"], [])
        assert tree.get("mystery") == 1
        assert any("mystery" in w for w in tree.warnings)

    def test_flag_forms(self):
        tree = parse_args(["--a", "1", "-b", "2", "--c=3", "--flag"], [])
        assert tree.get("a") == 1
        assert tree.get("b") == 2
        assert tree.get("c") == 3
        assert tree.get("flag") is True

    def test_malformed_token(self):
        with pytest.raises(ParseError) as e:
            parse_args(["--=3"], [])
        assert "--=3" in str(e.value)
        with pytest.raises(ParseError):
            parse_args(["--a..b=3"], [])

    def test_positionals_kept(self):
        tree = parse_args(["play", "seq.tumrgbd", "--rate=2"], [])
        assert tree.positionals == ["play", "seq.tumrgbd"]

    def test_negative_number_is_a_value(self):
        tree = parse_args(["--x", "-3"], [])
        assert tree.get("x") == -3

    @given(st.booleans(), st.booleans(), st.booleans())
    def test_precedence_total_order(self, use_argv, use_env, use_file):
        # precedence: argv > env > file > default
        spec = [ArgSpec("k", 0)]
        argv = ["--k=3"] if use_argv else []
        env = {"k": "2"} if use_env else {}
        import tempfile, os
        with tempfile.TemporaryDirectory() as d:
            if use_file:
                p = os.path.join(d, "f.json")
                with open(p, "w") as fh:
                    fh.write('{"k": 1}')
                argv = ["--conf", p] + argv
            tree = parse_args(argv, spec, environ=env)
        expected = 3 if use_argv else 2 if use_env else 1 if use_file else 0
        assert tree.get("k") == expected


class TestHelp:
    def test_empty_is_header_only(self):
        text = help_text([])
        assert text.startswith("#")
        assert len(text.splitlines()) == 1

    def test_one_spec_line(self):
        text = help_text([ArgSpec("level", 4, "tree depth")])
        line = text.splitlines()[1]
        assert "level" in line and "4" in line and "tree depth" in line

    def test_duplicate_fails_at_registration(self):
        p = ArgParser()
        p.add("x", 1)
        with pytest.raises(ConfigError):
            p.add("x", 2)


class TestFiles:
    def test_roundtrip_three_levels(self, tmp_path):
        t = ConfigTree({"a": {"b": {"c": 1, "d": "s"}, "e": True}, "f": 2.5})
        for name in ("t.json", "t.yaml"):
            path = tmp_path / name
            save_tree(t, str(path))
            assert load_tree(str(path)) == t

    def test_json_lookup(self, tmp_path):
        p = tmp_path / "cam.json"
        p.write_text('{"cam": {"fx": 500}}')
        assert load_tree(str(p)).get("cam.fx") == 500

    def test_xml_unsupported(self, tmp_path):
        p = tmp_path / "t.xml"
        p.write_text("<x/>")
        with pytest.raises(UnsupportedFormatError):
            load_tree(str(p))
        with pytest.raises(UnsupportedFormatError):
            save_tree(ConfigTree(), str(tmp_path / "o.xml"))

    def test_syntax_error_names_line(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text('{\n  "a": ,\n}')
        with pytest.raises(ParseError) as e:
            load_tree(str(p))
        assert ":2:" in str(e.value)

    def test_yaml_preserves_order(self, tmp_path):
        p = tmp_path / "o.yaml"
        p.write_text("z: 1\na: 2\nm: 3\n")
        assert list(load_tree(str(p)).as_dict().keys()) == ["z", "a", "m"]

    def test_array_rejected(self, tmp_path):
        p = tmp_path / "arr.json"
        p.write_text('{"a": [1, 2]}')
        with pytest.raises(ConfigError):
            load_tree(str(p))


def test_scalar_typing_order():
    assert coerce_scalar("true") is True
    assert coerce_scalar("False") is False
    assert coerce_scalar("3") == 3 and isinstance(coerce_scalar("3"), int)
    assert coerce_scalar("2.5") == 2.5
    assert coerce_scalar("1e-3") == 1e-3
    assert coerce_scalar("abc") == "abc"
