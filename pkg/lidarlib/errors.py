"""Exceptions du pipeline"""


class LidarError(Exception):
    """Erreur de base de lidarlib"""


class CubeFormatError(LidarError, ValueError):
    """Fichier de cube (ou de carte) corrompu ou incohérent"""


class DegenerateFitError(LidarError, ValueError):
    """Échantillons incompatibles avec un ajustement gamma"""


class NonFiniteTermError(LidarError, ValueError):
    """Terme non fini dans la log-postérieure"""

    def __init__(self, component: str, value: float):
        self.component = component
        self.value = value
        super().__init__(f"❌ Terme non fini dans la log-postérieure: {component} = {value}")


class StageError(LidarError, RuntimeError):
    """Échec d'une étape du pipeline, avec le nom de l'étape"""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"❌ Étape '{stage}' en échec: {cause}")
