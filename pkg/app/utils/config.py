from dataclasses import dataclass, replace
from typing import Optional
import os
from dotenv import load_dotenv
from utils.error_handler import ErrorType, handle_error, InputError

# Глобальный экземпляр конфигурации (для паттерна Синглтон)
_config_instance: Optional["AppConfig"] = None


@dataclass
class AppConfig:
    """Конфигурация приложения с валидацией и значениями по умолчанию."""

    # Воспроизводимость и разрешение
    seed: int = 0
    mesh_floor_mult: float = 4.0

    # Параллелизм (QCF_THREADS ограничивает внутренние пулы)
    threads: int = 1
    restarts: int = 16

    # Геометрические сетки поиска констант
    grid_ratio: float = 2.0**0.25

    # Пределы для точных/полных проверок
    dense_limit: int = 20_000
    exhaustive_metric_limit: int = 300
    metric_samples: int = 100_000
    exact_cover_limit: int = 200
    exact_cover_budget: int = 200_000
    invariant_samples: int = 24

    # Разрыв масштабов, при котором окружность через n точек строится вторым случаем
    circle_gap_ratio: float = 0.125

    # Движок максимального потока
    flow_engine: str = "networkx"

    # Пути к директориям
    data_dir: str = "./data"

    def __post_init__(self):
        """Валидация после инициализации."""
        if self.mesh_floor_mult < 1:
            raise InputError(
                f"mesh_floor_mult должен быть не меньше 1: {self.mesh_floor_mult}"
            )
        if self.threads < 1:
            raise InputError(f"Число потоков должно быть положительным: {self.threads}")
        if self.restarts < 1:
            raise InputError(f"Число перезапусков должно быть положительным: {self.restarts}")
        if not 0 < self.circle_gap_ratio < 1:
            raise InputError(f"circle_gap_ratio должен лежать в (0, 1): {self.circle_gap_ratio}")
        if self.grid_ratio <= 1:
            raise InputError(f"Шаг геометрической сетки должен быть > 1: {self.grid_ratio}")

    @classmethod
    def from_env(cls) -> "AppConfig":
        """
        Создает конфигурацию из переменных окружения.

        Returns:
            AppConfig: Экземпляр конфигурации
        """
        try:
            load_dotenv()

            return cls(
                seed=int(os.getenv("QCF_SEED", "0")),
                mesh_floor_mult=float(os.getenv("QCF_MESH_FLOOR_MULT", "4")),
                threads=int(os.getenv("QCF_THREADS", "1")),
                restarts=int(os.getenv("QCF_RESTARTS", "16")),
                dense_limit=int(os.getenv("QCF_DENSE_LIMIT", "20000")),
                circle_gap_ratio=float(os.getenv("QCF_CIRCLE_GAP", "0.125")),
                flow_engine=os.getenv("QCF_FLOW_ENGINE", "networkx"),
                data_dir=os.getenv("QCF_DATA_DIR", "./data"),
            )
        except Exception as e:
            handle_error(
                ErrorType.CONFIG_ERROR, e, show_cli_error=True, default_return=None
            )
            # Fallback на дефолтные настройки при ошибке
            return cls()


def get_config() -> AppConfig:
    """
    Получить глобальный экземпляр конфигурации.
    Реализует паттерн Синглтон для доступа к конфигурации из любого модуля.

    Returns:
        AppConfig: Экземпляр конфигурации
    """
    global _config_instance
    if _config_instance is None:
        _config_instance = AppConfig.from_env()

        # Создаем директории только один раз при первой инициализации
        try:
            os.makedirs(_config_instance.data_dir, exist_ok=True)
        except Exception as e:
            handle_error(
                ErrorType.CONFIG_ERROR,
                Exception(f"Ошибка при создании директорий: {str(e)}"),
                show_cli_error=True,
            )

    return _config_instance


def override_config(**fields) -> AppConfig:
    """
    Применяет переопределения (глобальные флаги CLI) к текущей конфигурации.

    Args:
        **fields: Поля AppConfig; значения None пропускаются

    Returns:
        AppConfig: Новый экземпляр конфигурации
    """
    global _config_instance
    updates = {key: value for key, value in fields.items() if value is not None}
    _config_instance = replace(get_config(), **updates)
    return _config_instance


def reset_config() -> None:
    """Сбрасывает синглтон; следующий get_config() перечитает окружение."""
    global _config_instance
    _config_instance = None
