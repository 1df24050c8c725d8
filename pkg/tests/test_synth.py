from collections import Counter

from warnrank.minic import parse_source
from warnrank.slicing import ContextMode, extract_context
from warnrank.synth import synthesize_corpus, write_corpus
from warnrank.warnings_io import detect_all, load_corpus, load_warnings


class TestDeterminism:
    def test_same_seed_byte_identical(self, tmp_path):
        a = synthesize_corpus(seed=3, n_projects=2, tp_rate=0.4, sites_per_project=6)
        b = synthesize_corpus(seed=3, n_projects=2, tp_rate=0.4, sites_per_project=6)
        assert a.files == b.files
        assert a.dataset.warnings == b.dataset.warnings
        dir_a, dir_b = tmp_path / "a", tmp_path / "b"
        write_corpus(a, dir_a)
        write_corpus(b, dir_b)
        files_a = sorted(p.relative_to(dir_a) for p in dir_a.rglob("*") if p.is_file())
        for rel in files_a:
            assert (dir_a / rel).read_bytes() == (dir_b / rel).read_bytes()

    def test_different_seed_differs(self):
        a = synthesize_corpus(seed=3, n_projects=2, tp_rate=0.4, sites_per_project=6)
        b = synthesize_corpus(seed=4, n_projects=2, tp_rate=0.4, sites_per_project=6)
        assert a.files != b.files


class TestLabelCounts:
    def test_binomial_count_near_expectation(self):
        # 200 sites at tp_rate 0.5: counts should land within +-10 of 100/100
        res = synthesize_corpus(seed=17, n_projects=4, tp_rate=0.5, sites_per_project=50)
        counts = Counter(w.label for w in res.dataset.warnings)
        assert counts["TP"] + counts["FP"] == 200
        assert abs(counts["TP"] - 100) <= 10


class TestDetectorConsistency:
    def test_detectors_reproduce_dataset_exactly(self, mini_bundle):
        detected = []
        for unit in mini_bundle["units"]:
            detected.extend(detect_all(unit))
        detected_keys = {w.key for w in detected}
        dataset_keys = {w.key for w in mini_bundle["dataset"].warnings}
        assert detected_keys == dataset_keys

    def test_one_warning_per_site_function(self, mini_bundle):
        per_fn = Counter(w.function for w in mini_bundle["dataset"].warnings)
        site_fns = {s.caller for s in mini_bundle["sites"]}
        assert set(per_fn) == site_fns
        assert all(c == 1 for c in per_fn.values())

    def test_every_warning_resolves_to_a_statement(self, mini_bundle):
        for w in mini_bundle["dataset"].warnings:
            ctx = extract_context(mini_bundle["sdg"], w, ContextMode.RAW_FUNCTION)
            assert ctx.reported in ctx.statements


class TestPlantedPatterns:
    def test_tp_slices_contain_their_planted_marker(self, mini_bundle):
        sdg = mini_bundle["sdg"]
        by_fn = {w.function: w for w in mini_bundle["dataset"].warnings}
        for site in mini_bundle["sites"]:
            if site.label != "TP":
                continue
            w = by_fn[site.caller]
            ctx = extract_context(sdg, w, ContextMode.CONTROL_AND_DATA)
            hits = [
                n
                for n in ctx.statements
                if n.function == site.marker_function
                and site.marker_text in sdg.stmt_of(n).text()
            ]
            assert hits, f"marker {site.marker_text!r} missing from slice of {site.caller}"

    def test_fp_slices_contain_their_guard_evidence(self, mini_bundle):
        sdg = mini_bundle["sdg"]
        by_fn = {w.function: w for w in mini_bundle["dataset"].warnings}
        for site in mini_bundle["sites"]:
            if site.label != "FP":
                continue
            w = by_fn[site.caller]
            ctx = extract_context(sdg, w, ContextMode.CONTROL_AND_DATA)
            hits = [
                n
                for n in ctx.statements
                if n.function == site.marker_function
                and site.marker_text in sdg.stmt_of(n).text()
            ]
            assert hits, f"marker {site.marker_text!r} missing from slice of {site.caller}"

    def test_cross_function_families_are_raw_blind(self, mini_bundle):
        """For cross-function families the caller must not reveal the label."""
        sdg = mini_bundle["sdg"]
        by_fn = {w.function: w for w in mini_bundle["dataset"].warnings}
        shapes = {}
        for site in mini_bundle["sites"]:
            if site.family not in ("bo_cross", "npd_guard_helper"):
                continue
            w = by_fn[site.caller]
            ctx = extract_context(sdg, w, ContextMode.RAW_FUNCTION)
            from warnrank.preprocess import abstract_token_lists
            from warnrank.slicing import context_token_lists

            token_lists, _ = context_token_lists(sdg, ctx)
            texts, _tab = abstract_token_lists(token_lists, sdg.functions.keys())
            # strip the variable-count-sensitive filler noise: keep only the
            # statements that belong to the planted core
            core = [
                t
                for t in texts
                if any(key in t for key in ("strcat", "malloc", "*", "FUNC"))
            ]
            shapes.setdefault(site.family, {}).setdefault(site.label, set()).add(tuple(core))
        for family, by_label in shapes.items():
            if len(by_label) == 2:
                overlap = by_label["TP"] & by_label["FP"]
                assert overlap or _shapes_equivalent(by_label), family


def _shapes_equivalent(by_label):
    # abstracted cores may differ only in VAR indices shifted by filler count
    import re

    def normal(shapes):
        return {
            tuple(re.sub(r"VAR\d+", "VAR", s) for s in shape) for shape in shapes
        }

    return normal(by_label["TP"]) & normal(by_label["FP"])


class TestWrittenCorpus:
    def test_corpus_loads_and_parses(self, mini_bundle):
        units, project_of = load_corpus(mini_bundle["root"])
        assert len(units) == len(project_of)
        ds = load_warnings(mini_bundle["root"] / "warnings.jsonl", project_of)
        assert ds.labeled()
        assert all(w.file in project_of for w in ds.warnings)

    def test_projects_have_distinct_identifier_pools(self, mini_bundle):
        tokens_by_project = {}
        for unit in mini_bundle["units"]:
            project = mini_bundle["dataset"].project_of[unit.source_id]
            toks = tokens_by_project.setdefault(project, set())
            for f in unit.functions:
                toks.add(f.name.split("_")[0])
        prefixes = list(tokens_by_project.values())
        for i in range(len(prefixes)):
            for j in range(i + 1, len(prefixes)):
                assert prefixes[i].isdisjoint(prefixes[j])
