"""Base repository for file-backed artifacts."""
import os
import tempfile
from pathlib import Path
from typing import Union

from gsgw.core.logging import get_logger
from gsgw.exceptions.exceptions import ParseError

logger = get_logger(__name__)

PathLike = Union[str, Path]


class BaseRepository:
    """Common path handling and atomic writes under a root directory."""

    def __init__(self, root: PathLike = "."):
        """
        Initialize repository.

        Args:
            root: Directory that relative names resolve against
        """
        self.root = Path(root)

    def resolve(self, name: PathLike) -> Path:
        path = Path(name)
        return path if path.is_absolute() else self.root / path

    def read_bytes(self, name: PathLike) -> bytes:
        """
        Read a whole file.

        Raises:
            ParseError: If the file does not exist
        """
        path = self.resolve(name)
        if not path.is_file():
            raise ParseError("file not found", path=str(path))
        return path.read_bytes()

    def read_text(self, name: PathLike) -> str:
        data = self.read_bytes(name)
        try:
            return data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError("file is not UTF-8 text", path=str(self.resolve(name)), offset=exc.start) from exc

    def write_bytes(self, name: PathLike, data: bytes) -> Path:
        """
        Write through a temporary file in the target directory, then rename.

        Returns:
            Final path
        """
        path = self.resolve(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        logger.debug(f"Wrote {len(data)} bytes", extra={"path": str(path)})
        return path

    def write_text(self, name: PathLike, text: str) -> Path:
        """UTF-8 text with LF line endings."""
        return self.write_bytes(name, text.replace("\r\n", "\n").encode("utf-8"))
