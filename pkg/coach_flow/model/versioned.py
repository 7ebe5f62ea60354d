from functools import cache

import snappy
from loguru import logger
from pydantic import BaseModel, ConfigDict
from pydantic_core import from_json

_SEPARATOR = b":"


class VersionedModel(BaseModel):
    """
    Base class for records that are written to disk and read back by a later run:
    trajectories, iteration buffers and trainer state.

    The serialized form is ``<schema version>:<compression flag>:<json payload>``, where the
    payload is snappy-compressed when the flag is ``1``. Reading a payload with an older
    schema version goes through `upgrade_schema`.
    """

    model_config = ConfigDict(json_schema_extra={"schema_version": 0})

    @classmethod
    @cache
    def get_schema_version(cls) -> int:
        return int(cls.model_json_schema()["schema_version"])

    def serialize(self, compression: bool = False) -> bytes:
        """
        Serialize this record, excluding computed fields.

        :param compression: whether to snappy-compress the json payload
        :return: the versioned byte representation
        """
        model_json = self.model_dump_json(exclude=set(self.__class__.model_computed_fields))
        payload = (
            snappy.compress(model_json, encoding="utf-8")
            if compression
            else model_json.encode("utf-8")
        )
        header = [str(self.get_schema_version()).encode("utf-8"), b"1" if compression else b"0"]
        return _SEPARATOR.join(header + [payload])

    @classmethod
    def upgrade_schema(cls, from_version: int, model_data: dict) -> dict:
        """
        Bring persisted data from an older schema version to the current one. Subclasses
        that change their schema override this; the base class knows no upgrades.

        :raises ValueError: when the persisted version cannot be upgraded
        """
        logger.error(
            "cannot read a {model_class} with schema version {persisted_version}, "
            "current schema version is {current_version}",
            model_class=cls.__name__,
            persisted_version=from_version,
            current_version=cls.get_schema_version(),
        )
        raise ValueError(f"Schema mis-match when deserializing a {cls.__name__} record")

    @classmethod
    def deserialize(cls, payload: bytes):
        persisted_version, compression, body = payload.split(_SEPARATOR, maxsplit=2)
        model_json = (
            snappy.decompress(body, decoding="utf-8")
            if compression == b"1"
            else body.decode("utf-8")
        )

        version = int(persisted_version.decode("utf-8"))
        if version != cls.get_schema_version():
            return cls.model_validate(cls.upgrade_schema(version, from_json(model_json)))
        return cls.model_validate_json(model_json)
