"""Ten (predicted, gold) pairs with hits@1, accuracy and F1 worked out by hand."""

from __future__ import annotations

# (predicted ranked list, gold set, hits@1, accuracy, f1)
PAIRS = [
    (["paris"], {"paris"}, 1, 1, 1.0),
    ([], {"paris"}, 0, 0, 0.0),
    (["london", "paris"], {"paris"}, 0, 0, 2 / 3),        # P=1/2 R=1
    (["paris", "london"], {"paris"}, 1, 0, 2 / 3),
    (["Paris "], {"paris"}, 1, 1, 1.0),                   # case and whitespace ignored
    (["berlin"], {"paris"}, 0, 0, 0.0),
    (["a", "b"], {"a", "b", "c", "d"}, 1, 0, 2 / 3),      # P=1 R=1/2
    (["a", "x", "y"], {"a", "b"}, 1, 0, 0.4),             # P=1/3 R=1/2 -> 2*(1/6)/(5/6)
    (["New  York"], {"new york"}, 1, 1, 1.0),
    (["b", "a"], {"a", "b"}, 1, 1, 1.0),
]
