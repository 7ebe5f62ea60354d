import os
from setuptools import setup

# release pipelines tag as "vX.Y.Z" or "X.Y.Z-build"; only the semantic part is the version
release_tag = os.getenv("CI_COMMIT_TAG") or os.getenv("COACH_FLOW_VERSION") or "0.0.0.dev0"
setup(
    version=release_tag.lstrip("v").split("-")[0],
)
