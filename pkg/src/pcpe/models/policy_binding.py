from dataclasses import dataclass

from .identifiers import check_identifier


@dataclass(frozen=True)
class InlinePolicy:
    """
    Customized policy: its text is a DataStream inside the object.
    """

    ds_id: str

    def __post_init__(self):
        check_identifier(self.ds_id, "DataStream de política")

    @property
    def kind(self) -> str:
        return "inline"


@dataclass(frozen=True)
class GroupPolicy:
    """
    Group policy: registered in the repository and stored by reference.
    """

    group_id: str

    def __post_init__(self):
        check_identifier(self.group_id, "grupo")

    @property
    def kind(self) -> str:
        return "group"


PolicyBinding = InlinePolicy | GroupPolicy
