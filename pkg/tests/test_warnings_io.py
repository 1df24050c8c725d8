import json

import pytest

from warnrank.minic import parse_source
from warnrank.warnings_io import (
    Dataset,
    DuplicateWarning,
    SchemaError,
    Warning,
    detect_bo,
    detect_npd,
    load_manifest,
    load_warnings,
    save_manifest,
    save_warnings,
)


class TestDetectBo:
    def test_single_strcat_yields_one_warning(self):
        unit = parse_source("void f(char *p, char *r){ strcat(p, r); }", "u.mc")
        warnings = detect_bo(unit)
        assert len(warnings) == 1
        assert warnings[0].kind == "BO"
        assert warnings[0].function == "f"
        assert warnings[0].line == 1

    def test_snprintf_is_not_risky(self):
        unit = parse_source(
            'void f(char *p){ char b[8]; snprintf(b, 8, "%s", p); }', "u.mc"
        )
        assert detect_bo(unit) == []

    def test_assignment_with_risky_callee_is_flagged(self):
        unit = parse_source("int f(char *p, char *r){ int n; n = sprintf(p, r); return n; }", "u.mc")
        assert len(detect_bo(unit)) == 1

    def test_billing_example_flags_reported_line(self, billing_unit):
        lines = {w.line for w in detect_bo(billing_unit)}
        assert 17 in lines


class TestDetectNpd:
    def test_unchecked_malloc_deref(self):
        unit = parse_source("void f(int n){ int *p; p = malloc(n); *p = 0; }", "u.mc")
        warnings = detect_npd(unit)
        assert len(warnings) == 1
        assert warnings[0].kind == "NPD"

    def test_checked_malloc_is_clean(self):
        unit = parse_source(
            "void f(int n){ int *p; p = malloc(n); if(p){ *p = 0; } }", "u.mc"
        )
        assert detect_npd(unit) == []

    def test_address_of_is_clean(self):
        unit = parse_source("void f(){ int x; int *p; p = &x; *p = 0; }", "u.mc")
        assert detect_npd(unit) == []

    def test_null_literal_deref(self):
        unit = parse_source("void f(int v){ int *p; p = NULL; *p = v; }", "u.mc")
        assert len(detect_npd(unit)) == 1

    def test_indirect_check_still_flagged(self):
        unit = parse_source(
            "void f(int n){ int *p; int ok; p = malloc(n); ok = (p != NULL); if(ok){ *p = 1; } }",
            "u.mc",
        )
        assert len(detect_npd(unit)) == 1

    def test_subscript_deref_of_pointer(self):
        unit = parse_source("void f(int n){ int *p; p = malloc(n); p[0] = 1; }", "u.mc")
        assert len(detect_npd(unit)) == 1

    def test_reassignment_clears_state(self):
        unit = parse_source(
            "void f(int n){ int x; int *p; p = NULL; p = &x; *p = 1; }", "u.mc"
        )
        assert detect_npd(unit) == []

    def test_determinism(self):
        src = "void f(int n){ int *p; p = malloc(n); *p = 0; }"
        a = detect_npd(parse_source(src, "u.mc"))
        b = detect_npd(parse_source(src, "u.mc"))
        assert a == b


class TestLoadWarnings:
    def _record(self, **overrides):
        rec = {
            "id": "a.mc:3:BO:risky-buffer-call",
            "file": "a.mc",
            "function": "f",
            "line": 3,
            "kind": "BO",
            "detector": "risky-buffer-call",
            "label": "TP",
        }
        rec.update(overrides)
        return rec

    def test_empty_file(self, tmp_path):
        path = tmp_path / "w.jsonl"
        path.write_text("")
        assert load_warnings(path).warnings == []

    def test_round_trip(self, tmp_path):
        path = tmp_path / "w.jsonl"
        path.write_text(json.dumps(self._record()) + "\n")
        ds = load_warnings(path)
        assert len(ds.warnings) == 1
        w = ds.warnings[0]
        assert (w.file, w.line, w.kind, w.label) == ("a.mc", 3, "BO", "TP")
        out = tmp_path / "w2.jsonl"
        save_warnings(ds, out)
        assert load_warnings(out).warnings == ds.warnings

    def test_label_normalized_to_uppercase(self, tmp_path):
        path = tmp_path / "w.jsonl"
        path.write_text(json.dumps(self._record(label="tp")) + "\n")
        assert load_warnings(path).warnings[0].label == "TP"

    def test_bad_label_names_line(self, tmp_path):
        path = tmp_path / "w.jsonl"
        path.write_text(
            json.dumps(self._record()) + "\n" + json.dumps(self._record(line=4, label="maybe")) + "\n"
        )
        with pytest.raises(SchemaError) as err:
            load_warnings(path)
        assert err.value.line == 2

    def test_missing_field_rejected(self, tmp_path):
        rec = self._record()
        del rec["detector"]
        path = tmp_path / "w.jsonl"
        path.write_text(json.dumps(rec) + "\n")
        with pytest.raises(SchemaError):
            load_warnings(path)

    def test_duplicate_key_rejected(self, tmp_path):
        path = tmp_path / "w.jsonl"
        path.write_text(json.dumps(self._record()) + "\n" + json.dumps(self._record()) + "\n")
        with pytest.raises(DuplicateWarning):
            load_warnings(path)

    def test_invalid_json_names_line(self, tmp_path):
        path = tmp_path / "w.jsonl"
        path.write_text("{not json\n")
        with pytest.raises(SchemaError) as err:
            load_warnings(path)
        assert err.value.line == 1

    def test_label_optional_for_rank_only_input(self, tmp_path):
        rec = self._record()
        del rec["label"]
        path = tmp_path / "w.jsonl"
        path.write_text(json.dumps(rec) + "\n")
        ds = load_warnings(path)
        assert ds.warnings[0].label is None
        assert not ds.labeled()


class TestManifest:
    def test_round_trip(self, tmp_path):
        mapping = {"p0/a.mc": "p0", "p1/b.mc": "p1"}
        path = tmp_path / "manifest.json"
        save_manifest(mapping, path)
        assert load_manifest(path) == mapping


class TestDatasetInvariants:
    def test_duplicate_warning_key_in_dataset(self):
        w = Warning(id="x", file="a.mc", function="f", line=1, kind="BO", detector="d")
        with pytest.raises(DuplicateWarning):
            Dataset([w, Warning(id="y", file="a.mc", function="f", line=1, kind="BO", detector="d")])
