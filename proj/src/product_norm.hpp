#pragma once

#include <Eigen/Dense>

namespace pama {

// ||A B^T - C D^T||_F without forming the n x m products. The difference is
// [A, -C] [B, D]^T; after thin QR of both stacks only a 2r x 2r core remains.
inline double product_diff_norm(const Eigen::MatrixXd &A, const Eigen::MatrixXd &B,
                                const Eigen::MatrixXd &C, const Eigen::MatrixXd &D)
{
  Eigen::MatrixXd left(A.rows(), A.cols() + C.cols());
  left << A, -C;
  Eigen::MatrixXd right(B.rows(), B.cols() + D.cols());
  right << B, D;
  if (left.rows() < left.cols() || right.rows() < right.cols())
    return (left * right.transpose()).norm();
  Eigen::HouseholderQR<Eigen::MatrixXd> ql(left);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(right);
  const Eigen::Index k = left.cols();
  const Eigen::MatrixXd Rl = ql.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd Rr = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  return (Rl * Rr.transpose()).norm();
}

inline double product_norm(const Eigen::MatrixXd &A, const Eigen::MatrixXd &B)
{
  if (A.rows() < A.cols() || B.rows() < B.cols())
    return (A * B.transpose()).norm();
  Eigen::HouseholderQR<Eigen::MatrixXd> qa(A);
  Eigen::HouseholderQR<Eigen::MatrixXd> qb(B);
  const Eigen::Index k = A.cols();
  const Eigen::MatrixXd Ra = qa.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd Rb = qb.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  return (Ra * Rb.transpose()).norm();
}

} // namespace pama
