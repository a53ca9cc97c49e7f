"""stagecraft: an orchestration engine for AI-driven interactive drama.

The engine plans a structured narrative blueprint from a topic or literary
work, runs a live performance in which autonomous AI actors (and optional
human players) speak and act on scene props under a narrator's adjudication,
steers the plot through control agents, and scores complete performances
pairwise.
"""

__version__ = "0.1.0"
