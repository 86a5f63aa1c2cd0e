import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pssp.dataset import (
    AMINO_ACIDS,
    DEFAULT_STRIDE_MAP,
    STRIDE_ALPHABET,
    ProteinRecord,
    SecondaryStructure,
    SplitMode,
    compute_eda,
    load_stride_map,
    map_stride_label,
    parse_records,
    serialize_records,
    split_train_val,
    write_eda_csvs,
)
from pssp.errors import (
    DegenerateSplitError,
    EmptyDatasetError,
    LengthMismatchError,
    MalformedRecordError,
    UnknownLabelCharError,
)

H, C, E = SecondaryStructure.H, SecondaryStructure.C, SecondaryStructure.E


class TestStrideMapping:
    def test_identity_cases(self):
        assert map_stride_label("H") is H
        assert map_stride_label("E") is E
        assert map_stride_label("C") is C

    def test_reduction_convention(self):
        assert map_stride_label("G") is H
        assert map_stride_label("I") is H
        assert map_stride_label("B") is E
        assert map_stride_label("b") is E
        assert map_stride_label("T") is C
        assert map_stride_label("S") is C
        assert map_stride_label("-") is C
        assert map_stride_label(" ") is C

    def test_total_on_alphabet_with_three_state_image(self):
        image = {map_stride_label(ch) for ch in STRIDE_ALPHABET}
        assert image == {H, C, E}

    def test_unknown_char_rejected(self):
        with pytest.raises(UnknownLabelCharError):
            map_stride_label("Q")

    def test_mapping_table_loadable_from_json(self, tmp_path):
        path = tmp_path / "map.json"
        path.write_text(json.dumps({ch: cls.name for ch, cls in DEFAULT_STRIDE_MAP.items()}))
        table = load_stride_map(path)
        assert table == DEFAULT_STRIDE_MAP


class TestParseRecords:
    def test_three_state_input_identity(self):
        records = parse_records(">r1\nRTDCYG\nHHHCCE\n")
        assert len(records) == 1
        assert records[0].id == "r1"
        assert records[0].residues == "RTDCYG"
        assert records[0].labels3 == (H, H, H, C, C, E)

    def test_length_mismatch_names_record(self):
        with pytest.raises(LengthMismatchError, match="r9"):
            parse_records(">r9\nAC\nHHH\n")

    def test_missing_field(self):
        with pytest.raises(MalformedRecordError):
            parse_records(">r1\nACDE\n")

    def test_header_required(self):
        with pytest.raises(MalformedRecordError, match="line 1"):
            parse_records("ACDE\nHHHH\n>x\n")

    def test_empty_id_rejected(self):
        with pytest.raises(MalformedRecordError):
            parse_records(">\nAC\nHH\n")

    def test_unknown_label_char_names_record(self):
        with pytest.raises(UnknownLabelCharError, match="r2"):
            parse_records(">r2\nAC\nHZ\n")

    def test_blank_lines_and_crlf(self):
        text = "\n>r1\r\nAC\r\n\nHH\r\n\n>r2\nDE\nEC\n\n"
        records = parse_records(text)
        assert [r.id for r in records] == ["r1", "r2"]
        assert records[0].residues == "AC"

    def test_residues_uppercased(self):
        rec = parse_records(">r\nacd\nHHH\n")[0]
        assert rec.residues == "ACD"

    def test_invalid_residue_char_rejected(self):
        with pytest.raises(MalformedRecordError):
            parse_records(">r\nA1C\nHHH\n")


@st.composite
def record_strategy(draw, index=0):
    residues = draw(st.text(alphabet=AMINO_ACIDS, min_size=1, max_size=40))
    labels = tuple(
        draw(st.lists(st.sampled_from(list(SecondaryStructure)), min_size=len(residues), max_size=len(residues)))
    )
    return ProteinRecord(f"rec{index}_{draw(st.integers(0, 999))}", residues, labels)


class TestRoundTrip:
    @settings(max_examples=40, deadline=None)
    @given(st.data())
    def test_parse_serialize_parse(self, data):
        n = data.draw(st.integers(1, 6))
        records = [data.draw(record_strategy(i)) for i in range(n)]
        again = parse_records(serialize_records(records))
        assert again == records


class TestEda:
    def test_hand_counted_example(self):
        records = [
            ProteinRecord("a", "AC", (H, H)),
            ProteinRecord("b", "ACD", (H, C, E)),
        ]
        eda = compute_eda(records)
        assert eda.length_histogram == {2: 1, 3: 1}
        assert eda.residue_frequency == {"A": 2, "C": 2, "D": 1}
        assert eda.class_frequency == {H: 3, C: 1, E: 1}
        assert eda.record_count == 2
        assert eda.residue_count == 5

    def test_single_record(self):
        eda = compute_eda([ProteinRecord("a", "A", (C,))])
        assert eda.length_histogram == {1: 1}

    def test_empty_rejected(self):
        with pytest.raises(EmptyDatasetError):
            compute_eda([])

    @settings(max_examples=25, deadline=None)
    @given(st.data())
    def test_count_conservation_against_recount(self, data):
        n = data.draw(st.integers(1, 8))
        records = [data.draw(record_strategy(i)) for i in range(n)]
        eda = compute_eda(records)
        # independent recount
        total = sum(len(r) for r in records)
        assert sum(eda.length_histogram.values()) == len(records)
        assert sum(eda.residue_frequency.values()) == total
        assert sum(eda.class_frequency.values()) == total
        for ch in set("".join(r.residues for r in records)):
            assert eda.residue_frequency[ch] == sum(r.residues.count(ch) for r in records)

    def test_csv_emission(self, tmp_path):
        records = [ProteinRecord("a", "AC", (H, E))]
        paths = write_eda_csvs(compute_eda(records), tmp_path)
        assert sorted(p.name for p in paths) == ["classes.csv", "lengths.csv", "residues.csv"]
        lines = (tmp_path / "residues.csv").read_text().strip().splitlines()
        assert lines[0] == "key,count"
        assert set(lines[1:]) == {"A,1", "C,1"}


def _dummy_windows(n, protein="p"):
    from pssp.augment import WindowSample

    return [
        WindowSample(f"{protein}{i % 3}" if protein == "mixed" else protein, i, (0,) * 3, (0,) * 3, (True,) * 3)
        for i in range(n)
    ]


class TestSplit:
    def test_eighty_twenty_counts(self):
        train, val = split_train_val(_dummy_windows(10), 0.8, seed=1)
        assert len(train) == 8 and len(val) == 2

    def test_same_seed_same_partition(self):
        items = _dummy_windows(25)
        assert split_train_val(items, 0.8, seed=9) == split_train_val(items, 0.8, seed=9)

    def test_partition_is_exact(self):
        items = _dummy_windows(30)
        train, val = split_train_val(items, 0.7, seed=3)
        assert len(train) + len(val) == 30
        key = lambda w: (w.source_id, w.offset)
        assert sorted(map(key, train + val)) == sorted(map(key, items))
        assert not {key(w) for w in train} & {key(w) for w in val}

    def test_protein_level_keeps_proteins_whole(self):
        from pssp.augment import WindowSample

        items = [WindowSample("p1", i, (0,), (0,), (True,)) for i in range(4)] + [
            WindowSample("p2", i, (0,), (0,), (True,)) for i in range(4)
        ]
        train, val = split_train_val(items, 0.5, seed=0, mode=SplitMode.PROTEIN)
        train_ids = {w.source_id for w in train}
        val_ids = {w.source_id for w in val}
        assert not train_ids & val_ids
        assert train_ids | val_ids == {"p1", "p2"}

    def test_protein_level_randomized_group_integrity(self):
        from pssp.augment import WindowSample

        for seed in range(5):
            items = [
                WindowSample(f"p{i % 7}", off, (0,), (0,), (True,))
                for off, i in enumerate(range(60))
            ]
            train, val = split_train_val(items, 0.75, seed=seed, mode=SplitMode.PROTEIN)
            assert not {w.source_id for w in train} & {w.source_id for w in val}
            assert len(train) + len(val) == 60

    def test_degenerate_raises(self):
        with pytest.raises(DegenerateSplitError):
            split_train_val(_dummy_windows(1), 0.8, seed=0)
        with pytest.raises(DegenerateSplitError):
            split_train_val([], 0.8, seed=0)
        with pytest.raises(DegenerateSplitError):
            split_train_val(_dummy_windows(10), 0.99, seed=0)
