import hashlib
import json
import os
from typing import Any, Optional
from utils.logger import log_artifact_saved
from utils.error_handler import ErrorType, safe_operation, InputError
from utils.config import get_config


def save_json_document(
    document: Any, file_path: Optional[str] = None, directory: Optional[str] = None
) -> str:
    """
    Сохраняет JSON-документ (пространство, дуги, отчёт).

    Args:
        document: Сериализуемый объект
        file_path: Путь к файлу; относительный путь без каталога кладётся в directory
        directory: Директория для сохранения (по умолчанию используется data_dir)

    Returns:
        str: Полный путь к сохраненному файлу
    """
    return safe_operation(
        _save_json_document_impl,
        ErrorType.FILE_ERROR,
        operation_name="Сохранение JSON-документа",
        reraise=True,
        document=document,
        file_path=file_path,
        directory=directory,
    )


def _save_json_document_impl(
    document: Any, file_path: Optional[str] = None, directory: Optional[str] = None
) -> str:
    """Внутренняя реализация сохранения JSON-документа"""
    file_path = get_document_path(file_path or "artifact.json", directory)

    parent = os.path.dirname(file_path)
    if parent:
        os.makedirs(parent, exist_ok=True)

    text = dumps_document(document)
    with open(file_path, "w", encoding="utf-8") as f:
        f.write(text)

    log_artifact_saved(file_path, os.path.getsize(file_path))
    return file_path


def save_text_document(text: str, file_path: str, directory: Optional[str] = None) -> str:
    """
    Сохраняет текстовый артефакт (SVG) как есть.

    Args:
        text: Содержимое
        file_path: Путь к файлу
        directory: Директория для имени без каталога (по умолчанию data_dir)

    Returns:
        str: Полный путь к сохраненному файлу
    """

    def _save() -> str:
        path = get_document_path(file_path, directory)
        parent = os.path.dirname(path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
        log_artifact_saved(path, os.path.getsize(path))
        return path

    return safe_operation(
        _save, ErrorType.FILE_ERROR, operation_name="Сохранение текстового документа", reraise=True
    )


def read_json_document(file_path: str) -> Any:
    """
    Читает JSON-документ.

    Args:
        file_path: Путь к файлу

    Returns:
        Any: Разобранный документ

    Raises:
        InputError: файл отсутствует или не является JSON
    """
    return safe_operation(
        _read_json_document_impl,
        ErrorType.FILE_ERROR,
        operation_name="Чтение JSON-документа",
        reraise=True,
        file_path=file_path,
    )


def _read_json_document_impl(file_path: str) -> Any:
    """Внутренняя реализация чтения JSON-документа"""
    if not os.path.exists(file_path):
        raise InputError(f"Файл не найден: {file_path}")
    with open(file_path, "r", encoding="utf-8") as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as e:
            raise InputError(f"Файл {file_path} не является JSON: {e}") from e


def dumps_document(document: Any) -> str:
    """
    Детерминированная сериализация: фиксированный порядок ключей и
    repr-представление чисел с плавающей точкой (точный обратный разбор).
    """
    return json.dumps(document, sort_keys=True, ensure_ascii=False, indent=1) + "\n"


def document_digest(document: Any) -> str:
    """Короткий SHA-1 канонической сериализации документа (ссылка space_ref)."""
    text = json.dumps(document, sort_keys=True, separators=(",", ":"))
    return hashlib.sha1(text.encode("utf-8")).hexdigest()[:16]


def get_document_path(filename: str, directory: Optional[str] = None) -> str:
    """
    Получает полный путь к документу.

    Args:
        filename: Имя файла или путь
        directory: Директория (по умолчанию используется data_dir)

    Returns:
        str: Полный путь к файлу
    """
    if os.path.dirname(filename) or os.path.isabs(filename):
        return filename
    if directory is None:
        directory = get_config().data_dir

    if not filename.endswith(".json") and not filename.endswith(".svg"):
        filename = f"{filename}.json"

    return os.path.join(directory, filename)
