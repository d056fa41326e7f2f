"""trustpipe: a desk-scale trusted-AI pipeline system.

Component library, DAG pipeline compiler and executor with content-addressed
artifact lineage, fairness/explainability/robustness evaluation, a blessing
gate, and a canary-capable model-serving stub.
"""

__version__ = "0.1.0"
