"""Predicate extraction, goal-directed reasoning, and justified answers.

Task layers: qualitative comparison questions (``star.quarel``), one-unknown
addition/subtraction word problems (``star.algebra``), and a goal-directed
restaurant-recommendation bot (``star.concierge``), all built on the logic
interpreter in ``star.logic`` and fed by the language-model boundary in
``star.llm``.
"""

__version__ = "0.1.0"
