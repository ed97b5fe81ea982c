import re

from ..stream import Post

TOKEN_RE = re.compile(r"#\w+|\w+")


def tokenize(text: str) -> list[str]:
    """Lowercased word tokens; hashtags stay atomic and keep their '#'."""
    return [t.lower() for t in TOKEN_RE.findall(text or "")]


def text_tokens(text: str) -> list[str]:
    """Tokens with every hashtag removed (encoder input must never see targets)."""
    return [t for t in tokenize(text) if not t.startswith("#")]


def hashtag_token(h: str) -> str:
    return "#" + h


def corpus_tokens(post: Post) -> list[str]:
    """Word2Vec sentence for a post: its text tokens plus any tag missing from the text."""
    toks = tokenize(post.text)
    present = {t[1:] for t in toks if t.startswith("#")}
    toks.extend(hashtag_token(h) for h in post.hashtags if h not in present)
    return toks
