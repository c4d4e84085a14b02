import io

import pytest
from hypothesis import given, strategies as st

from xlir.corpus import (
    Document,
    ParseError,
    Qrels,
    Query,
    TestCollection,
    aligned_query_ids,
    collection_from_json,
    collection_to_json,
    load_collection,
    parse_qrels,
    parse_topics,
    parse_trec_documents,
    tokenize,
    write_trec_documents,
)


def test_tokenize_drops_stopwords():
    assert tokenize("The cat ran", "en", {"the"}) == ["cat", "ran"]


def test_tokenize_empty():
    assert tokenize("", "en", set()) == []


def test_tokenize_punctuation():
    assert tokenize("A, b; c!", "en", {"a"}) == ["b", "c"]


def test_tokenize_keeps_indic_combining_marks():
    # Devanagari vowel signs are category M*, not punctuation; danda is.
    assert tokenize("संजय दत्त का आत्मसमर्पण।", "hi", {"का"}) == ["संजय", "दत्त", "आत्मसमर्पण"]


def test_tokenize_nfc():
    decomposed = "café"
    assert tokenize(decomposed) == ["café"]


def test_parse_single_document():
    docs = parse_trec_documents(b"<DOC><DOCNO>d1</DOCNO><TEXT>cats chase mice</TEXT></DOC>", "en")
    assert docs == [Document("d1", "en", ("cats", "chase", "mice"))]
    assert docs[0].raw_length == 3


def test_parse_empty_stream():
    assert parse_trec_documents(io.BytesIO(b""), "en") == []
    assert parse_topics(b"", "en") == []


def test_parse_two_documents_in_order():
    data = (b"<DOC>\n<DOCNO> d1 </DOCNO>\n<TEXT>one two</TEXT>\n</DOC>\n"
            b"<DOC>\n<DOCNO>d2</DOCNO>\n<TEXT>three</TEXT>\n</DOC>\n")
    docs = parse_trec_documents(data, "en")
    assert [d.doc_id for d in docs] == ["d1", "d2"]
    assert docs[1].tokens == ("three",)


def test_missing_docno_names_offset():
    data = b"<DOC><DOCNO>d1</DOCNO><TEXT>x</TEXT></DOC>\n<DOC><TEXT>y</TEXT></DOC>"
    with pytest.raises(ParseError, match="byte offset 43"):
        parse_trec_documents(data, "en")


def test_duplicate_docno():
    data = b"<DOC><DOCNO>d1</DOCNO><TEXT>x</TEXT></DOC><DOC><DOCNO>d1</DOCNO><TEXT>y</TEXT></DOC>"
    with pytest.raises(ParseError, match="d1"):
        parse_trec_documents(data, "en")


def test_parse_topic_title_only():
    topics = b"""<top lang="en">
<num>26</num>
<title>surrender of sanjay dutt</title>
<desc>Find documents about the surrender.</desc>
</top>"""
    assert parse_topics(topics, "en", {"of"}) == [Query(26, "en", ("surrender", "sanjay", "dutt"))]


def test_parse_classic_trec_topics():
    topics = b"<top>\n<num> Number: 1\n<title> alpha beta\n<desc> Description:\nignored\n</top>\n" \
             b"<top>\n<num> Number: 2\n<title> gamma\n</top>\n"
    qs = parse_topics(topics, "en")
    assert [(q.query_id, q.title_tokens) for q in qs] == [(1, ("alpha", "beta")), (2, ("gamma",))]


@pytest.mark.parametrize("block", [b"<top><title>x</title></top>", b"<top><num>3</num></top>"])
def test_topic_missing_field(block):
    with pytest.raises(ParseError):
        parse_topics(block, "en")


def test_qrels_binary():
    assert parse_qrels(b"26 0 d1 1").entries == {(26, "d1"): 1}
    assert parse_qrels(b"26 0 d1 2").entries == {(26, "d1"): 1}
    q = parse_qrels(b"26 0 d1 0\n26 0 d2 1\n")
    assert q.relevant(26) == {"d2"}
    assert q.judged(26) == {"d1": 0, "d2": 1}


def test_qrels_bad_line_number():
    with pytest.raises(ParseError, match="line 2"):
        parse_qrels(b"1 0 d1 1\nx 0 d2 1\n")


def test_collection_vocabulary_and_relevant_set():
    docs = [Document("d1", "en", ("a", "b")), Document("d2", "en", ("a", "a"))]
    coll = TestCollection("en", docs, [Query(1, "en", ("a",))], Qrels({(1, "d1"): 1, (1, "zz"): 1, (1, "d2"): 0}))
    assert coll.vocabulary == {"a": 3, "b": 1}
    assert sum(coll.vocabulary.values()) == coll.total_tokens == 4
    assert coll.relevant_set(1) == {"d1"}  # unjudged/absent docs are ignored


def test_alignment_validator():
    def coll(lang, ids):
        return TestCollection(lang, [], [Query(i, lang, ("x",)) for i in ids], Qrels())

    assert aligned_query_ids({"en": coll("en", [1, 2]), "hi": coll("hi", [1, 2]), "bn": coll("bn", [1, 2, 9])}) == [1, 2]
    with pytest.raises(ValueError, match="partially"):
        aligned_query_ids({"en": coll("en", [1, 2]), "hi": coll("hi", [1, 2]), "bn": coll("bn", [1])})


words = st.text(alphabet=st.characters(whitelist_categories=("Ll", "Lu", "Nd", "Lo", "Mn", "Mc")), min_size=1, max_size=8)


@given(st.lists(st.lists(words, max_size=12), min_size=1, max_size=6))
def test_round_trip(texts):
    docs = [Document(f"d{i}", "xx", tuple(tokenize(" ".join(t)))) for i, t in enumerate(texts)]
    buf = io.StringIO()
    write_trec_documents(docs, buf)
    again = parse_trec_documents(buf.getvalue().encode("utf-8"), "xx")
    assert [d.tokens for d in again] == [d.tokens for d in docs]


def test_load_collection_from_files(tmp_path, small_synth):
    layout = small_synth.write(tmp_path)
    coll = load_collection("en", **{k: tmp_path / v for k, v in layout["en"].items()})
    ref = small_synth.collections["en"]
    assert coll.documents == ref.documents
    assert coll.queries == ref.queries
    assert coll.qrels.entries == ref.qrels.entries
    again = collection_from_json(collection_to_json(coll))
    assert again.documents == coll.documents and again.qrels.entries == coll.qrels.entries
