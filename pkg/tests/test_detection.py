"""Annotation preparation, detector adapters, and document scoring."""

import json

import numpy as np
import pytest

from reviewlens import (
    ConfigError,
    DegenerateInputError,
    Detection,
    DocumentDetections,
    FormatError,
    ImageRecord,
    MockDetector,
    PageDetections,
    ParseError,
    SchemaError,
    ValidationError,
    classify_documents,
    detect_document,
    detections_to_json,
    document_score,
    import_detections,
    parse_voc,
    rows_from_csv,
    rows_to_csv,
    split_rows,
    voc_to_rows,
    write_split_manifests,
)
from reviewlens.detection import CSV_HEADER

from helpers import (
    make_png,
    make_voc_xml,
    random_document_detections,
    random_voc_annotation,
    write_json,
)


class TestParseVoc:
    def test_single_object_fixture(self):
        xml = make_voc_xml("scan-001.png", 600, 800, [("handwriting", 48, 240, 195, 371)])
        ann = parse_voc(xml)
        assert ann.filename == "scan-001.png"
        assert (ann.width, ann.height) == (600, 800)
        assert len(ann.objects) == 1
        obj = ann.objects[0]
        assert obj.class_name == "handwriting"
        assert (obj.xmin, obj.ymin, obj.xmax, obj.ymax) == (48, 240, 195, 371)

    def test_zero_objects(self):
        ann = parse_voc(make_voc_xml("empty.png", 100, 100, []))
        assert ann.objects == ()

    def test_inverted_box_rejected(self):
        xml = make_voc_xml("bad.png", 600, 800, [("handwriting", 195, 240, 48, 371)])
        with pytest.raises(ValidationError):
            parse_voc(xml)

    def test_malformed_xml_reports_location(self):
        with pytest.raises(ParseError, match=r"line \d+"):
            parse_voc(b"<annotation><filename>x</filename>")

    def test_missing_box_field_named(self):
        xml = (
            b"<annotation><filename>f.png</filename>"
            b"<size><width>10</width><height>10</height></size>"
            b"<object><name>h</name>"
            b"<bndbox><xmin>1</xmin><ymin>1</ymin><xmax>5</xmax></bndbox>"
            b"</object></annotation>"
        )
        with pytest.raises(SchemaError, match="ymax"):
            parse_voc(xml)

    def test_unknown_elements_ignored(self):
        xml = make_voc_xml(
            "x.png", 50, 50, [("h", 0, 0, 10, 10)], extra_elements=True
        )
        ann = parse_voc(xml)
        assert len(ann.objects) == 1

    def test_fractional_coordinates_round_to_nearest(self):
        xml = (
            b"<annotation><filename>f.png</filename>"
            b"<size><width>100</width><height>100</height></size>"
            b"<object><name>h</name>"
            b"<bndbox><xmin>10.6</xmin><ymin>10.4</ymin>"
            b"<xmax>20.5</xmax><ymax>30.0</ymax></bndbox>"
            b"</object></annotation>"
        )
        obj = parse_voc(xml).objects[0]
        assert (obj.xmin, obj.ymin, obj.xmax, obj.ymax) == (11, 10, 21, 30)

    def test_box_exceeding_image_rejected(self):
        xml = make_voc_xml("b.png", 100, 100, [("h", 0, 0, 101, 50)])
        with pytest.raises(ValidationError):
            parse_voc(xml)


class TestRowsAndCsv:
    def test_row_count_follows_object_count(self):
        anns = [
            parse_voc(make_voc_xml("a.png", 100, 100,
                                   [("h", 0, 0, 10, 10), ("h", 5, 5, 20, 20),
                                    ("stamp", 1, 1, 9, 9)])),
            parse_voc(make_voc_xml("b.png", 100, 100, [])),
        ]
        rows = voc_to_rows(anns)
        assert len(rows) == 3
        assert all(row.filename == "a.png" for row in rows)

    def test_empty_table_is_header_only(self):
        text = rows_to_csv([])
        assert text == ",".join(CSV_HEADER) + "\n"

    def test_exact_header_line(self):
        text = rows_to_csv(voc_to_rows([parse_voc(
            make_voc_xml("a.png", 10, 10, [("h", 0, 0, 5, 5)]))]))
        assert text.splitlines()[0] == "filename,width,height,class,xmin,ymin,xmax,ymax"

    def test_round_trip_over_random_fixtures(self):
        """XML → rows → CSV → rows is lossless for names and coordinates."""
        rng = np.random.default_rng(0)
        for _ in range(50):
            xml, _ = random_voc_annotation(rng)
            rows = voc_to_rows([parse_voc(xml)])
            again = rows_from_csv(rows_to_csv(rows))
            assert again == rows

    def test_csv_file_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        xml, _ = random_voc_annotation(rng)
        rows = voc_to_rows([parse_voc(xml)])
        path = tmp_path / "annotations.csv"
        rows_to_csv(rows, path)
        assert rows_from_csv(path) == rows

    def test_wrong_header_rejected(self):
        with pytest.raises(FormatError):
            rows_from_csv("filename,w,h,class,xmin,ymin,xmax,ymax\na,1,1,h,0,0,1,1\n")

    def test_short_row_rejected(self):
        text = ",".join(CSV_HEADER) + "\na.png,10,10,h,0,0\n"
        with pytest.raises(FormatError, match="row 0"):
            rows_from_csv(text)


def _rows_for(filenames, rng):
    rows = []
    for name in filenames:
        for _ in range(int(rng.integers(1, 4))):
            rows.extend(voc_to_rows([parse_voc(make_voc_xml(
                name, 100, 100, [("h", 0, 0, 10, 10)]))]))
    return rows


class TestSplitRows:
    def test_counts_follow_rounded_fraction(self):
        rng = np.random.default_rng(2)
        rows = _rows_for([f"f{i}.png" for i in range(10)], rng)
        train, test = split_rows(rows, test_fraction=0.2, seed=0)
        assert len({r.filename for r in train}) == 8
        assert len({r.filename for r in test}) == 2

    def test_same_seed_identical_split(self):
        rng = np.random.default_rng(3)
        rows = _rows_for([f"f{i}.png" for i in range(12)], rng)
        assert split_rows(rows, 0.25, seed=9) == split_rows(rows, 0.25, seed=9)

    def test_filename_never_spans_sides(self):
        rng = np.random.default_rng(4)
        rows = _rows_for(["only.png"], rng) * 5
        train, test = split_rows(rows, 0.5, seed=1)
        assert not train or not test

    def test_union_and_disjointness(self):
        rng = np.random.default_rng(5)
        for seed in range(10):
            names = [f"f{i}.png" for i in range(int(rng.integers(2, 15)))]
            rows = _rows_for(names, rng)
            train, test = split_rows(rows, 0.3, seed=seed)
            assert len(train) + len(test) == len(rows)
            assert {r.filename for r in train}.isdisjoint({r.filename for r in test})
            assert sorted(train + test, key=id) is not None
            # multiset union equals the input
            assert sorted(map(repr, train + test)) == sorted(map(repr, rows))

    def test_order_of_rows_does_not_change_membership(self):
        """Filenames decide the split, so shuffling rows moves nothing."""
        rng = np.random.default_rng(6)
        rows = _rows_for([f"f{i}.png" for i in range(8)], rng)
        train1, test1 = split_rows(rows, 0.25, seed=3)
        shuffled = list(rows)
        rng.shuffle(shuffled)
        train2, test2 = split_rows(shuffled, 0.25, seed=3)
        assert {r.filename for r in test1} == {r.filename for r in test2}
        assert {r.filename for r in train1} == {r.filename for r in train2}

    def test_fraction_bounds(self):
        rng = np.random.default_rng(7)
        rows = _rows_for(["a.png"], rng)
        for bad in (0.0, 1.0, -0.1, 1.5):
            with pytest.raises(ConfigError):
                split_rows(rows, bad, seed=0)

    def test_empty_table(self):
        with pytest.raises(DegenerateInputError):
            split_rows([], 0.5, seed=0)

    def test_split_manifests_list_first_appearance_order(self, tmp_path):
        rng = np.random.default_rng(8)
        rows = _rows_for([f"f{i}.png" for i in range(6)], rng)
        train, test = split_rows(rows, 0.34, seed=2)
        train_path, test_path = write_split_manifests(train, test, tmp_path)
        listed = train_path.read_text().splitlines()
        seen = []
        for row in train:
            if row.filename not in seen:
                seen.append(row.filename)
        assert listed == seen
        assert set(test_path.read_text().splitlines()) == {r.filename for r in test}


def _page_records(tmp_path, doc_id, count):
    tmp_path.mkdir(parents=True, exist_ok=True)
    records = []
    for i in range(count):
        path = tmp_path / f"{doc_id}-page-{i}.png"
        path.write_bytes(make_png(seed=300 + i))
        records.append(ImageRecord(
            id=f"{doc_id}-page-{i}", path=str(path), doc_id=doc_id, page_index=i
        ))
    return records


class TestDetectDocument:
    def test_deterministic_across_runs(self, tmp_path):
        records = _page_records(tmp_path, "doc-1", 3)
        first = detect_document(records, MockDetector(seed=1))
        second = detect_document(records, MockDetector(seed=1))
        assert first == second
        assert first.page_count == 3
        assert [p.page_index for p in first.pages] == [0, 1, 2]

    def test_pages_scored_in_page_order(self, tmp_path):
        records = _page_records(tmp_path, "doc-2", 4)
        scrambled = [records[2], records[0], records[3], records[1]]
        doc = detect_document(scrambled, MockDetector(seed=5))
        assert [p.page_index for p in doc.pages] == [0, 1, 2, 3]

    def test_failed_page_is_isolated(self, tmp_path):
        records = _page_records(tmp_path, "doc-3", 3)
        (tmp_path / "doc-3-page-1.png").unlink()
        doc = detect_document(records, MockDetector(seed=1))
        assert doc.failed_pages() == (1,)
        failing = doc.pages[1]
        assert failing.error is not None
        assert failing.detections == ()
        assert doc.pages[0].error is None and doc.pages[2].error is None

    def test_all_detections_valid(self, tmp_path):
        rng = np.random.default_rng(9)
        for trial in range(5):
            records = _page_records(tmp_path / f"t{trial}", f"d{trial}", 4)
            doc = detect_document(records, MockDetector(seed=int(rng.integers(100))))
            for page in doc.pages:
                for det in page.detections:
                    assert 0.0 <= det.score <= 1.0
                    x0, y0, x1, y1 = det.box
                    assert 0.0 <= x0 < x1 <= 1.0
                    assert 0.0 <= y0 < y1 <= 1.0

    def test_mixed_documents_rejected(self, tmp_path):
        a = _page_records(tmp_path / "a", "doc-a", 1)
        b = _page_records(tmp_path / "b", "doc-b", 1)
        with pytest.raises(ValidationError):
            detect_document(a + b, MockDetector())

    def test_no_pages_rejected(self):
        with pytest.raises(DegenerateInputError):
            detect_document([], MockDetector())


class TestImportDetections:
    def test_identity_load(self, tmp_path):
        rng = np.random.default_rng(10)
        payload = {
            "documents": [random_document_detections(rng, f"doc-{i}") for i in range(2)]
        }
        path = write_json(tmp_path / "det.json", payload)
        documents = import_detections(path)
        assert [d.doc_id for d in documents] == ["doc-0", "doc-1"]

    def test_round_trip_through_json(self):
        rng = np.random.default_rng(11)
        for i in range(20):
            payload = {"documents": [random_document_detections(rng, f"d{i}")]}
            documents = import_detections(payload)
            again = import_detections(detections_to_json(documents))
            assert again == documents

    def test_score_above_one_names_location(self):
        payload = {"documents": [{
            "doc_id": "doc-x", "page_count": 1,
            "pages": [{"page_index": 0,
                       "detections": [{"score": 1.3, "box": [0, 0, 0.5, 0.5],
                                       "class": "h"}]}],
        }]}
        with pytest.raises(ValidationError, match="doc-x.*page 0"):
            import_detections(payload)

    def test_duplicate_page_index(self):
        payload = {"documents": [{
            "doc_id": "doc-y", "page_count": 2,
            "pages": [{"page_index": 0, "detections": []},
                      {"page_index": 0, "detections": []}],
        }]}
        with pytest.raises(ValidationError, match="duplicate page_index"):
            import_detections(payload)

    def test_pixel_boxes_normalized_by_page_size(self):
        payload = {"documents": [{
            "doc_id": "doc-z", "page_count": 1,
            "pages": [{"page_index": 0, "width": 600, "height": 800,
                       "detections": [{"score": 0.5, "box": [48, 240, 195, 371],
                                       "class": "h"}]}],
        }]}
        (doc,) = import_detections(payload)
        box = doc.pages[0].detections[0].box
        np.testing.assert_allclose(box, (48 / 600, 240 / 800, 195 / 600, 371 / 800))

    def test_oversized_box_without_page_size(self):
        payload = {"documents": [{
            "doc_id": "doc-w", "page_count": 1,
            "pages": [{"page_index": 0,
                       "detections": [{"score": 0.5, "box": [0, 0, 4, 4],
                                       "class": "h"}]}],
        }]}
        with pytest.raises(ValidationError):
            import_detections(payload)

    def test_missing_doc_id(self):
        with pytest.raises(SchemaError):
            import_detections({"documents": [{"page_count": 1, "pages": []}]})

    def test_invalid_json_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{nope")
        with pytest.raises(FormatError):
            import_detections(path)

    def test_page_index_outside_page_count(self):
        payload = {"documents": [{
            "doc_id": "doc-v", "page_count": 1,
            "pages": [{"page_index": 3, "detections": []}],
        }]}
        with pytest.raises(ValidationError):
            import_detections(payload)


def _doc(doc_id, score_lists, page_count=None):
    pages = tuple(
        PageDetections(
            page_index=i,
            detections=tuple(
                Detection(score=s, box=(0.1, 0.1, 0.2, 0.2), class_name="h")
                for s in scores
            ),
        )
        for i, scores in enumerate(score_lists)
    )
    return DocumentDetections(
        doc_id=doc_id, pages=pages,
        page_count=page_count if page_count is not None else len(score_lists),
    )


class TestDocumentScore:
    def test_max_across_pages(self):
        assert document_score(_doc("d", [[0.2, 0.7], [0.4]])) == 0.7

    def test_no_detections_scores_zero(self):
        assert document_score(_doc("d", [[], [], []])) == 0.0

    def test_singleton(self):
        assert document_score(_doc("d", [[0.93]])) == 0.93

    def test_invariant_under_page_and_detection_order(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            score_lists = [
                [float(s) for s in rng.uniform(0, 1, size=rng.integers(0, 4))]
                for _ in range(int(rng.integers(1, 5)))
            ]
            base = document_score(_doc("d", score_lists))
            shuffled = [list(s) for s in score_lists]
            rng.shuffle(shuffled)
            for page in shuffled:
                rng.shuffle(page)
            assert document_score(_doc("d", shuffled)) == base

    def test_lower_scores_never_move_the_max(self):
        base_lists = [[0.6], [0.3]]
        base = document_score(_doc("d", base_lists))
        lowered = document_score(_doc("d", [[0.6, base - 0.1], [0.3]]))
        assert lowered == base
        raised = document_score(_doc("d", [[0.6, 0.95], [0.3]]))
        assert raised == 0.95


class TestClassifyDocuments:
    def test_boundary_is_positive(self):
        assert classify_documents({"d": 0.99}, 0.99) == {"d": "positive"}

    def test_zero_score_below_cutoff(self):
        assert classify_documents({"d": 0.0}, 0.1) == {"d": "negative"}

    def test_cutoff_zero_everything_positive(self):
        scores = {"a": 0.0, "b": 0.5, "c": 1.0}
        assert set(classify_documents(scores, 0.0).values()) == {"positive"}

    def test_monotone_in_cutoff(self):
        rng = np.random.default_rng(13)
        scores = {f"d{i}": float(rng.uniform(0, 1)) for i in range(30)}
        previous_positives = None
        for cutoff in (0.0, 0.25, 0.5, 0.75, 1.0):
            positives = {
                d for d, v in classify_documents(scores, cutoff).items()
                if v == "positive"
            }
            if previous_positives is not None:
                assert positives <= previous_positives
            previous_positives = positives

    def test_cutoff_out_of_range(self):
        with pytest.raises(ConfigError):
            classify_documents({"d": 0.5}, 1.1)
