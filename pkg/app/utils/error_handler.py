from enum import Enum
import sys
import traceback
from typing import Any, Optional, Callable, TypeVar, List, Tuple
from utils.logger import log_error, log_info

# Тип для возвращаемого значения функции
T = TypeVar("T")


class ErrorType(Enum):
    """Типы ошибок приложения."""

    INPUT_ERROR = "Некорректные входные данные"
    METRIC_ERROR = "Нарушение аксиом метрики"
    CONSTRUCTION_ERROR = "Ошибка построения"
    VERIFICATION_ERROR = "Проверка результата не пройдена"
    FILE_ERROR = "Ошибка при работе с файлом"
    CONFIG_ERROR = "Ошибка в конфигурации"
    UNKNOWN_ERROR = "Неизвестная ошибка"


class QcfError(Exception):
    """Базовое исключение приложения; несёт код выхода CLI."""

    exit_code = 1
    error_type = ErrorType.UNKNOWN_ERROR


class InputError(QcfError):
    """Некорректный вход: схема файла, аргументы, невалидные дуги."""

    exit_code = 4
    error_type = ErrorType.INPUT_ERROR


class MetricAxiomError(InputError):
    """
    Нарушение аксиом метрики.

    Attributes:
        witness: Пара (a, b) для симметрии/диагонали или тройка (a, b, c) для
            неравенства треугольника
    """

    error_type = ErrorType.METRIC_ERROR

    def __init__(self, message: str, witness: Tuple[int, ...]):
        super().__init__(message)
        self.witness = tuple(int(w) for w in witness)


class ConstructionError(QcfError):
    """
    Сбой построения.

    Attributes:
        trace: Упорядоченный список записей трассы (этап, случай, масштаб, ...)
    """

    exit_code = 3
    error_type = ErrorType.CONSTRUCTION_ERROR

    def __init__(self, message: str, trace: Optional[List[dict]] = None):
        super().__init__(message)
        self.trace = list(trace or [])


class ResolutionError(ConstructionError):
    """Построение упёрлось в разрешение дискретизации."""

    def __init__(
        self,
        message: str,
        trace: Optional[List[dict]] = None,
        achieved: Optional[int] = None,
    ):
        super().__init__(message, trace)
        self.achieved = achieved


class FlowCutError(ConstructionError):
    """Максимальный поток меньше требуемого; несёт минимальный вершинный разрез."""

    def __init__(
        self,
        message: str,
        cut: List[int],
        flow_value: int,
        trace: Optional[List[dict]] = None,
    ):
        super().__init__(message, trace)
        self.cut = sorted(int(v) for v in cut)
        self.flow_value = int(flow_value)


class ArcOverlapError(InputError):
    """Внутренности склеиваемых дуг пересекаются; несёт точку-свидетеля."""

    def __init__(self, message: str, point: int):
        super().__init__(message)
        self.point = int(point)


class DetourError(ConstructionError):
    """Аннулус не соединяет точки входа и выхода (нет ALC на этом масштабе)."""


class ChainStallError(ConstructionError):
    """Жадная цепочка покрытия застряла до достижения финальной части дуги."""


class VerificationError(QcfError):
    """Повторная проверка артефакта не пройдена."""

    exit_code = 2
    error_type = ErrorType.VERIFICATION_ERROR

    def __init__(self, message: str, failures: Optional[List[str]] = None):
        super().__init__(message)
        self.failures = list(failures or [])


def handle_error(
    error_type: ErrorType,
    exception: Exception,
    show_cli_error: bool = True,
    default_return: Optional[Any] = None,
) -> Any:
    """
    Централизованная обработка ошибок с логированием и выводом в stderr.

    Args:
        error_type: Тип ошибки из перечисления ErrorType
        exception: Объект исключения
        show_cli_error: Нужно ли печатать ошибку в stderr
        default_return: Значение, возвращаемое при ошибке

    Returns:
        default_return или None
    """
    error_msg = f"{error_type.value}: {str(exception)}"

    # Подробное логирование
    log_error(error_msg)
    log_error(traceback.format_exc())

    if show_cli_error:
        sys.stderr.write(error_msg + "\n")

    return default_return


def safe_operation(
    operation: Callable[..., T],
    error_type: ErrorType,
    show_cli_error: bool = True,
    default_return: Optional[T] = None,
    operation_name: Optional[str] = None,
    reraise: bool = False,
    *args,
    **kwargs,
) -> T:
    """
    Безопасное выполнение операции с единообразной обработкой ошибок.

    Args:
        operation: Функция для выполнения
        error_type: Тип ошибки из перечисления ErrorType
        show_cli_error: Нужно ли печатать ошибку в stderr
        default_return: Значение по умолчанию при ошибке
        operation_name: Имя операции для логирования (если None, будет использовано имя функции)
        reraise: Пробросить исключение после логирования
        *args, **kwargs: Аргументы для передачи в функцию

    Returns:
        Результат функции или default_return при ошибке
    """
    if operation_name is None:
        operation_name = operation.__name__

    try:
        log_info(f"Начало выполнения операции: {operation_name}")
        result = operation(*args, **kwargs)
        log_info(f"Операция {operation_name} успешно выполнена")
        return result
    except Exception as e:
        # Для исключений приложения тип берём из самого исключения
        effective_type = e.error_type if isinstance(e, QcfError) else error_type
        handled = handle_error(effective_type, e, show_cli_error, default_return)
        if reraise:
            raise
        return handled
