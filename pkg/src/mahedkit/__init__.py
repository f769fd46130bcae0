"""Hope/hate, multi-task emotion/offensive and hateful-meme moderation toolkit.

Submodules
----------
corpus       line-delimited dataset loading, validation, oversampling
embeddings   embedding providers (stub / remote / replay) and on-disk cache
fusion       text/image embedding fusion scenarios
svm          RBF soft-margin SVM trained with SMO
mlp          dual-branch feed-forward network (numpy, Adam)
gateway      prompt templates, LLM transports, label parsing, record/replay
pipeline     task orchestration: voting ensemble, cascade, meme detectors
metrics      confusion matrices and macro P/R/F1/F2 reports
synthetic    deterministic synthetic fixtures for the three tasks
cli          ``mahedkit`` command-line entry point
"""

__version__ = "0.1.0"

TASK_HOPE = 1
TASK_MULTI = 2
TASK_MEME = 3

UNDEFINED = "undefined"
