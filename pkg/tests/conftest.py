import io

import pytest

from punerboot.corpus import Document, Sentence, read_conllu

HARD_DRIVE_DOCK = """# newdoc id = dock
1\thard\t_\tADJ\t_\t_\t2\tamod\t_\t_
2\tdrive\t_\tNOUN\t_\t_\t3\tcompound\t_\t_
3\tdock\t_\tNOUN\t_\t_\t0\troot\t_\t_

"""

ACCEPTANCE_LINES = []


@pytest.fixture
def dock_doc():
    return read_conllu(io.StringIO(HARD_DRIVE_DOCK))[0]


def make_doc(*sentences, doc_id="d"):
    """Build a document from lists of surfaces or (surface, head, deprel) triples."""
    sents = []
    for s in sentences:
        if s and isinstance(s[0], tuple):
            sents.append(Sentence.from_surfaces([x[0] for x in s], [x[1] for x in s], [x[2] for x in s]))
        else:
            sents.append(Sentence.from_surfaces(s))
    return Document(doc_id, tuple(sents))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
